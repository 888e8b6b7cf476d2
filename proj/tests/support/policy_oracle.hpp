#pragma once

// Reference implementation of the reactive scheduling policies, kept
// deliberately naive: plain list scans, no cursor or slot bookkeeping shared
// with the engine. Timelines feed both this and the runtime scheduler; the
// traces must match exactly.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "radon/config.hpp"

namespace oracle {

struct Arrival {
  int64_t at_ms;
};
struct Completion {
  int64_t at_ms;
  std::size_t event_index;  // which earlier arrival finished
};
struct Tick {
  int64_t at_ms;
};
using Occurrence = std::variant<Arrival, Completion, Tick>;

struct StepTrace {
  std::optional<uint64_t> assigned;  // set for arrivals
  std::vector<uint64_t> retired;     // ids retired during this occurrence
};

class PolicyOracle {
 public:
  explicit PolicyOracle(const radon::SchedulingPolicy& p) : policy_(p) {}

  StepTrace step(const Occurrence& occ) {
    StepTrace out;
    if (const auto* a = std::get_if<Arrival>(&occ)) {
      out.retired = expire_idle(a->at_ms);
      out.assigned = assign(a->at_ms);
      assignments_.push_back(*out.assigned);
    } else if (const auto* c = std::get_if<Completion>(&occ)) {
      out.retired = complete(assignments_.at(c->event_index), c->at_ms);
    } else {
      out.retired = expire_idle(std::get<Tick>(occ).at_ms);
    }
    return out;
  }

  std::size_t live() const { return items_.size(); }
  const std::vector<uint64_t>& assignments() const { return assignments_; }

 private:
  struct Item {
    uint64_t id;
    bool busy;
    uint64_t handled;
    int64_t last_ms;
  };

  uint64_t assign(int64_t now_ms) {
    if (std::holds_alternative<radon::PolicyOne>(policy_) ||
        std::holds_alternative<radon::PolicyRoundRobin>(policy_)) {
      uint64_t k = 1;
      if (const auto* rr = std::get_if<radon::PolicyRoundRobin>(&policy_)) k = rr->limit;
      // No instance ever dies under these policies here, so the assignment
      // is pure modular arithmetic over the arrival index.
      uint64_t id = (arrivals_++ % k) + 1;
      if (id > items_.size()) items_.push_back({id, true, 1, now_ms});
      return id;
    }
    if (std::holds_alternative<radon::PolicyOnDemand>(policy_)) {
      ++arrivals_;
      items_.push_back({next_id_, true, 1, now_ms});
      return next_id_++;
    }
    ++arrivals_;
    Item* pick = nullptr;
    for (auto& it : items_) {
      if (it.busy) continue;
      if (!pick || it.last_ms < pick->last_ms ||
          (it.last_ms == pick->last_ms && it.id < pick->id))
        pick = &it;
    }
    if (!pick) {
      items_.push_back({next_id_, true, 1, now_ms});
      return next_id_++;
    }
    pick->busy = true;
    ++pick->handled;
    pick->last_ms = now_ms;
    return pick->id;
  }

  std::vector<uint64_t> complete(uint64_t id, int64_t now_ms) {
    std::vector<uint64_t> retired;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].id != id) continue;
      items_[i].busy = false;
      items_[i].last_ms = now_ms;
      if (std::holds_alternative<radon::PolicyOnDemand>(policy_)) {
        retired.push_back(id);
        items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(i));
      } else if (const auto* ode = std::get_if<radon::PolicyOnDemandExpire>(&policy_)) {
        if (ode->max_events && items_[i].handled >= *ode->max_events) {
          retired.push_back(id);
          items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(i));
        }
      }
      break;
    }
    return retired;
  }

  std::vector<uint64_t> expire_idle(int64_t now_ms) {
    std::vector<uint64_t> retired;
    const auto* ode = std::get_if<radon::PolicyOnDemandExpire>(&policy_);
    if (!ode || !ode->idle_timeout) return retired;
    int64_t timeout = ode->idle_timeout->count();
    std::vector<Item> keep;
    for (auto& it : items_) {
      if (!it.busy && now_ms - it.last_ms >= timeout)
        retired.push_back(it.id);
      else
        keep.push_back(it);
    }
    items_ = std::move(keep);
    return retired;
  }

  radon::SchedulingPolicy policy_;
  std::vector<Item> items_;
  std::vector<uint64_t> assignments_;
  uint64_t arrivals_ = 0;
  uint64_t next_id_ = 1;
};

// Policy configurations exercised by randomized equivalence runs.
inline std::vector<radon::SchedulingPolicy> equivalence_policies() {
  using namespace radon;
  using std::chrono::milliseconds;
  std::vector<SchedulingPolicy> out;
  out.push_back(PolicyOne{});
  out.push_back(PolicyRoundRobin{1});
  out.push_back(PolicyRoundRobin{2});
  out.push_back(PolicyRoundRobin{8});
  out.push_back(PolicyOnDemand{});
  out.push_back(PolicyOnDemandExpire{milliseconds(10), std::nullopt});
  out.push_back(PolicyOnDemandExpire{milliseconds(5000), std::nullopt});
  out.push_back(PolicyOnDemandExpire{milliseconds(10), uint64_t{1}});
  out.push_back(PolicyOnDemandExpire{milliseconds(10), uint64_t{10}});
  out.push_back(PolicyOnDemandExpire{milliseconds(5000), uint64_t{1}});
  out.push_back(PolicyOnDemandExpire{milliseconds(5000), uint64_t{10}});
  return out;
}

}  // namespace oracle
