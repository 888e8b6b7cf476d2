#include "radon/scheduler.hpp"

#include <algorithm>

namespace radon {

ReactiveScheduler::ReactiveScheduler(SchedulingPolicy policy) : policy_(std::move(policy)) {}

bool ReactiveScheduler::queueing_policy() const {
  return std::holds_alternative<PolicyOne>(policy_) ||
         std::holds_alternative<PolicyRoundRobin>(policy_);
}

ReactiveScheduler::Slot* ReactiveScheduler::find(uint64_t instance) {
  for (auto& s : slots_)
    if (s.id == instance) return &s;
  return nullptr;
}

void ReactiveScheduler::erase(uint64_t instance) {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].id != instance) continue;
    slots_.erase(slots_.begin() + static_cast<std::ptrdiff_t>(i));
    if (i < cursor_) --cursor_;
    if (cursor_ >= slots_.size()) cursor_ = 0;
    return;
  }
}

void ReactiveScheduler::purge_expired(MonoTime now, std::vector<uint64_t>& retired) {
  const auto* ode = std::get_if<PolicyOnDemandExpire>(&policy_);
  if (!ode || !ode->idle_timeout) return;
  for (std::size_t i = 0; i < slots_.size();) {
    const Slot& s = slots_[i];
    if (!s.busy && now - s.last_activity >= *ode->idle_timeout) {
      retired.push_back(s.id);
      slots_.erase(slots_.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      ++i;
    }
  }
  if (cursor_ >= slots_.size()) cursor_ = 0;
}

Assignment ReactiveScheduler::on_event(MonoTime now, std::vector<uint64_t>& retired) {
  if (queueing_policy()) {
    std::size_t limit = 1;
    if (const auto* rr = std::get_if<PolicyRoundRobin>(&policy_)) limit = rr->limit;
    if (slots_.size() < limit) {
      Slot s;
      s.id = next_id_++;
      s.busy = true;
      s.events_handled = 1;
      s.last_activity = now;
      slots_.push_back(s);
      cursor_ = slots_.size() % limit;
      return {s.id, true};
    }
    Slot& s = slots_[cursor_];
    cursor_ = (cursor_ + 1) % slots_.size();
    s.busy = true;
    ++s.events_handled;
    s.last_activity = now;
    return {s.id, false};
  }

  if (std::holds_alternative<PolicyOnDemand>(policy_)) {
    Slot s;
    s.id = next_id_++;
    s.busy = true;
    s.events_handled = 1;
    s.last_activity = now;
    slots_.push_back(s);
    return {s.id, true};
  }

  purge_expired(now, retired);
  Slot* pick = nullptr;
  for (auto& s : slots_) {
    if (s.busy) continue;
    if (!pick || s.last_activity < pick->last_activity ||
        (s.last_activity == pick->last_activity && s.id < pick->id))
      pick = &s;
  }
  if (pick) {
    pick->busy = true;
    ++pick->events_handled;
    pick->last_activity = now;
    return {pick->id, false};
  }
  Slot s;
  s.id = next_id_++;
  s.busy = true;
  s.events_handled = 1;
  s.last_activity = now;
  slots_.push_back(s);
  return {s.id, true};
}

void ReactiveScheduler::on_complete(uint64_t instance, MonoTime now,
                                    std::vector<uint64_t>& retired) {
  Slot* s = find(instance);
  if (!s) return;
  s->busy = false;
  s->last_activity = now;

  if (std::holds_alternative<PolicyOnDemand>(policy_)) {
    retired.push_back(instance);
    erase(instance);
    return;
  }
  if (const auto* ode = std::get_if<PolicyOnDemandExpire>(&policy_)) {
    if (ode->max_events && s->events_handled >= *ode->max_events) {
      retired.push_back(instance);
      erase(instance);
    }
  }
}

void ReactiveScheduler::on_tick(MonoTime now, std::vector<uint64_t>& retired) {
  purge_expired(now, retired);
}

void ReactiveScheduler::on_gone(uint64_t instance) { erase(instance); }

std::optional<MonoTime> ReactiveScheduler::next_deadline() const {
  const auto* ode = std::get_if<PolicyOnDemandExpire>(&policy_);
  if (!ode || !ode->idle_timeout) return std::nullopt;
  std::optional<MonoTime> earliest;
  for (const auto& s : slots_) {
    if (s.busy) continue;
    MonoTime t = s.last_activity + *ode->idle_timeout;
    if (!earliest || t < *earliest) earliest = t;
  }
  return earliest;
}

}  // namespace radon
