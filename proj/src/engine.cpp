#include "radon/engine.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>

namespace radon {

using namespace std::chrono_literals;

// ---- modules ----

Result<void> InProcessModules::add(const std::string& definition, GuestMain main,
                                   RecoverHook recover) {
  std::lock_guard lk(mu_);
  if (defs_.count(definition))
    return make_error(Errc::duplicate, "definition '" + definition + "' already registered");
  defs_[definition] = Behavior{std::move(main), std::move(recover)};
  return {};
}

Result<Behavior> InProcessModules::load(const std::string& definition) {
  std::lock_guard lk(mu_);
  auto it = defs_.find(definition);
  if (it == defs_.end())
    return make_error(Errc::not_found, "unknown definition '" + definition + "'");
  return it->second;
}

// ---- guest task ----

void GuestTask::promise_type::FinalAwaiter::await_suspend(
    std::coroutine_handle<promise_type> h) noexcept {
  auto& p = h.promise();
  if (p.engine && p.inst) p.engine->note_done(p.inst);
}

// ---- receive awaiter ----

namespace {
// inst->mu held. An event-envelope handed to the guest joins the
// instance's set of unanswered response slots.
void note_popped_locked(Instance* inst, const Envelope& env) {
  if (!env.correlation_id || !is_event_envelope(env)) return;
  auto& v = inst->active_corrs;
  if (std::find(v.begin(), v.end(), *env.correlation_id) == v.end())
    v.push_back(*env.correlation_id);
}
}  // namespace

bool ReceiveAwaiter::await_ready() {
  std::lock_guard lk(inst_->mu);
  if (inst_->retire_requested || inst_->exiting) {
    outcome_ = Outcome::Stopped;
    return true;
  }
  if (auto e = inst_->mailbox.pop()) {
    note_popped_locked(inst_, *e);
    env_ = std::move(e);
    outcome_ = Outcome::Got;
    return true;
  }
  if (timeout_ && timeout_->count() <= 0) {
    outcome_ = Outcome::Timeout;
    return true;
  }
  return false;
}

bool ReceiveAwaiter::await_suspend(std::coroutine_handle<> h) {
  (void)h;  // single-coroutine guests: h is the instance's own task handle
  // This awaiter lives inside the coroutine frame. The moment `waiting`
  // becomes visible outside the lock, another thread may resume and even
  // destroy the frame, so everything needed afterwards is copied out first.
  Engine* engine = engine_;
  Instance* inst = inst_;
  std::optional<MonoTime> deadline;
  if (timeout_) deadline = engine->clock().now() + *timeout_;
  std::weak_ptr<Instance> weak;
  uint64_t epoch = 0;
  {
    std::lock_guard lk(inst->mu);
    if (inst->retire_requested || inst->exiting) {
      outcome_ = Outcome::Stopped;
      return false;
    }
    if (auto e = inst->mailbox.pop()) {
      note_popped_locked(inst, *e);
      env_ = std::move(e);
      outcome_ = Outcome::Got;
      return false;
    }
    // The activation step ends here: clear `running` before the wake state
    // becomes visible so the next resume never observes an overlap.
    weak = inst->self;
    inst->running = false;
    inst->waiting = true;
    inst->state = InstanceState::Idle;
    epoch = ++inst->wait_epoch;
  }
  if (deadline) engine->register_wait(std::move(weak), epoch, *deadline);
  return true;
}

Result<Envelope> ReceiveAwaiter::await_resume() {
  switch (outcome_) {
    case Outcome::Got:
      return std::move(*env_);
    case Outcome::Timeout:
      return make_error(Errc::timeout, "receive timed out");
    case Outcome::Stopped:
      return make_error(Errc::stopped, "instance stopping");
    case Outcome::Undecided:
      break;
  }
  std::lock_guard lk(inst_->mu);
  if (inst_->retire_requested || inst_->exiting)
    return make_error(Errc::stopped, "instance stopping");
  if (auto e = inst_->mailbox.pop()) {
    note_popped_locked(inst_, *e);
    return std::move(*e);
  }
  return make_error(Errc::timeout, "receive timed out");
}

// ---- atom context ----

const AtomName& AtomContext::self_name() const { return inst_->name; }
uint64_t AtomContext::incarnation() const { return inst_->incarnation; }

void AtomContext::exit() {
  std::lock_guard lk(inst_->mu);
  inst_->exiting = true;
}

Result<void> AtomContext::send(const DestinationSelector& dest, Ordering ordering,
                               std::string payload) {
  return engine_->router_.send(inst_->name, dest, ordering, std::move(payload));
}

ReceiveAwaiter AtomContext::receive(std::optional<std::chrono::milliseconds> timeout) {
  return ReceiveAwaiter(engine_, inst_, timeout);
}

Result<std::vector<AtomName>> AtomContext::resolve(const std::string& query, NameSpace space) {
  return engine_->registry_.resolve(query, space);
}

Result<void> AtomContext::alias_add(const Alias& alias, const AtomName& member) {
  return engine_->registry_.alias_add(alias, member);
}

Result<void> AtomContext::alias_remove(const Alias& alias, const AtomName& member) {
  return engine_->registry_.alias_remove(alias, member);
}

Result<std::optional<std::string>> AtomContext::storage_get(const std::string& key) {
  if (!engine_->store_) return make_error(Errc::unavailable, "node has no store");
  return engine_->store_->get(key);
}

Result<void> AtomContext::storage_set(const std::string& key, const std::string& value) {
  if (!engine_->store_) return make_error(Errc::unavailable, "node has no store");
  auto r = engine_->store_->set(key, value);
  if (!r && r.error().code == Errc::io_error)
    throw std::runtime_error("storage failure: " + r.error().message);  // guest fault
  return r;
}

Result<void> AtomContext::storage_del(const std::string& key) {
  if (!engine_->store_) return make_error(Errc::unavailable, "node has no store");
  auto r = engine_->store_->erase(key);
  if (!r && r.error().code == Errc::io_error)
    throw std::runtime_error("storage failure: " + r.error().message);  // guest fault
  return r;
}

Result<std::vector<std::string>> AtomContext::storage_scan(const std::string& prefix) {
  if (!engine_->store_) return make_error(Errc::unavailable, "node has no store");
  return engine_->store_->keys_with_prefix(prefix);
}

Result<void> AtomContext::respond(const CorrelationId& correlation, int status,
                                  std::string body) {
  Engine::Responder fn;
  {
    std::lock_guard lk(engine_->port_mu_);
    fn = engine_->responder_;
  }
  if (!fn) return make_error(Errc::unavailable, "no event responder on this node");
  if (!fn(correlation, status, std::move(body)))
    return make_error(Errc::not_found, "no pending event for correlation");
  std::lock_guard lk(inst_->mu);
  auto& v = inst_->active_corrs;
  v.erase(std::remove(v.begin(), v.end(), correlation), v.end());
  return {};
}

void AtomContext::event_complete() { engine_->note_event_complete(inst_); }

std::chrono::system_clock::time_point AtomContext::now() const {
  return std::chrono::system_clock::now();
}

std::string AtomContext::random_bytes(std::size_t n) const {
  std::string out(n, '\0');
  std::size_t off = 0;
  while (off < n) {
    std::size_t chunk = std::min<std::size_t>(256, n - off);
    if (::getentropy(out.data() + off, chunk) != 0)
      throw std::runtime_error("entropy source failed");
    off += chunk;
  }
  return out;
}

// ---- engine ----

namespace {

std::string describe_fault(const std::exception_ptr& f) {
  try {
    std::rethrow_exception(f);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "non-exception fault";
  }
}

}  // namespace

Engine::Engine(Registry& registry, Router& router, Options opts)
    : registry_(registry),
      router_(router),
      node_id_(std::move(opts.node_id)),
      tags_(std::move(opts.tags)),
      store_(opts.store),
      clock_(opts.clock ? opts.clock : &default_clock_),
      log_(opts.logger ? opts.logger : &default_logger_) {
  worker_count_ = opts.workers;
  if (worker_count_ == 0) {
    unsigned hc = std::thread::hardware_concurrency();
    worker_count_ = std::clamp<std::size_t>(hc ? hc : 2, 2, 8);
  }
  escalate_ = [this](const AtomName& name, const std::string& what) {
    log_->info("escalate: atom " + name.str() + " fault stops the node: " + what);
    std::_Exit(2);
  };
}

Engine::~Engine() { stop(); }

void Engine::start() {
  if (started_) return;
  started_ = true;
  stopping_.store(false);
  for (std::size_t i = 0; i < worker_count_; ++i)
    workers_.emplace_back([this] { worker_main(); });
  timer_ = std::thread([this] { timer_main(); });
}

void Engine::stop() {
  if (!started_) return;
  stopping_.store(true);
  run_cv_.notify_all();
  timer_cv_.notify_all();
  for (auto& w : workers_) w.join();
  workers_.clear();
  if (timer_.joinable()) timer_.join();
  started_ = false;
  drain_done();
  std::map<std::string, std::shared_ptr<Instance>> doomed;
  {
    std::lock_guard lk(mu_);
    doomed.swap(instances_);
    reactive_.clear();
    reactive_order_.clear();
  }
  for (auto& [n, inst] : doomed) registry_.deregister_local(inst->name);
  doomed.clear();  // destroys suspended frames
}

Result<void> Engine::register_definition(const std::string& name, GuestMain main,
                                         RecoverHook recover) {
  return modules_.add(name, std::move(main), std::move(recover));
}

std::shared_ptr<Instance> Engine::make_instance(AtomName name, const std::string& definition,
                                                AtomKind kind, RecoveryPolicy recovery,
                                                Behavior behavior,
                                                std::optional<Event> initial) {
  auto inst = std::make_shared<Instance>();
  inst->name = std::move(name);
  inst->definition = definition;
  inst->kind = kind;
  inst->recovery = recovery;
  inst->self = inst;
  inst->behavior = std::move(behavior);
  inst->ctx.engine_ = this;
  inst->ctx.inst_ = inst.get();
  if (initial && !initial->correlation.is_zero())
    inst->active_corrs.push_back(initial->correlation);
  inst->task = inst->behavior.main(inst->ctx, std::move(initial));
  inst->task.handle.promise().engine = this;
  inst->task.handle.promise().inst = inst.get();
  return inst;
}

std::shared_ptr<Instance> Engine::find(const AtomName& name) const {
  std::lock_guard lk(mu_);
  auto it = instances_.find(name.str());
  return it == instances_.end() ? nullptr : it->second;
}

Result<AtomName> Engine::spawn_daemon(const AtomConfiguration& config) {
  if (config.kind != AtomKind::Daemon)
    return make_error(Errc::invalid_argument, "spawn_daemon requires a daemon configuration");
  if (auto v = validate_configuration(config); !v) return v.error();
  if (!host_eligible(config.hosts, node_id_, tags_))
    return make_error(Errc::constraint_mismatch,
                      "node " + node_id_ + " not eligible for '" + config.name + "'");
  auto name = expand_name_template(config.name, node_id_);
  if (!name) return name.error();
  auto beh = modules_.load(config.definition);
  if (!beh) return beh.error();

  auto reg = registry_.register_local(*name);
  if (!reg) return reg.error();

  auto inst = make_instance(*name, config.definition, AtomKind::Daemon, config.recovery,
                            std::move(*beh), std::nullopt);
  inst->incarnation = *reg;
  {
    std::lock_guard lk(mu_);
    instances_[name->str()] = inst;
  }
  log_->lifecycle(LifecycleEvent::spawn, name->str(), config.definition);
  enqueue(std::move(inst));
  return *name;
}

Result<void> Engine::install_reactive(const AtomConfiguration& config) {
  if (config.kind != AtomKind::Reactive)
    return make_error(Errc::invalid_argument, "install_reactive requires a reactive configuration");
  if (auto v = validate_configuration(config); !v) return v.error();
  if (!host_eligible(config.hosts, node_id_, tags_))
    return make_error(Errc::constraint_mismatch,
                      "node " + node_id_ + " not eligible for '" + config.definition + "'");
  if (auto beh = modules_.load(config.definition); !beh) return beh.error();

  std::lock_guard lk(mu_);
  if (reactive_.count(config.definition))
    return make_error(Errc::duplicate,
                      "reactive definition '" + config.definition + "' already installed");
  reactive_.emplace(config.definition, ReactiveDef{config, ReactiveScheduler(*config.scheduling), {}});
  reactive_order_.push_back(config.definition);
  return {};
}

std::vector<AtomName> Engine::slots_to_names(ReactiveDef& rd,
                                             const std::vector<uint64_t>& slots) {
  std::vector<AtomName> out;
  for (uint64_t s : slots) {
    auto it = rd.by_slot.find(s);
    if (it == rd.by_slot.end()) continue;
    out.push_back(it->second);
    rd.by_slot.erase(it);
  }
  return out;
}

Result<AtomName> Engine::dispatch_event(const std::string& definition, Event ev) {
  if (stopping_.load()) return make_error(Errc::stopped, "engine stopping");
  std::vector<AtomName> retired;
  std::shared_ptr<Instance> fresh;
  std::shared_ptr<Instance> reuse;
  AtomName chosen;
  {
    std::lock_guard lk(mu_);
    auto it = reactive_.find(definition);
    if (it == reactive_.end())
      return make_error(Errc::not_found,
                        "no reactive definition '" + definition + "' installed");
    ReactiveDef& rd = it->second;
    std::vector<uint64_t> retired_slots;
    Assignment a = rd.sched.on_event(clock_->now(), retired_slots);
    retired = slots_to_names(rd, retired_slots);
    if (a.fresh) {
      auto beh = modules_.load(definition);
      if (!beh) {
        rd.sched.on_gone(a.instance);
        return beh.error();
      }
      chosen = AtomName::unchecked(definition + "/" + node_id_ + "/" +
                                   std::to_string(a.instance));
      fresh = make_instance(chosen, definition, AtomKind::Reactive, rd.config.recovery,
                            std::move(*beh), std::move(ev));
      fresh->sched_id = a.instance;
      fresh->sched_busy = true;
      fresh->events_handled = 1;
      rd.by_slot[a.instance] = chosen;
      instances_[chosen.str()] = fresh;
    } else {
      auto bit = rd.by_slot.find(a.instance);
      if (bit == rd.by_slot.end())
        return make_error(Errc::not_found, "scheduler slot lost");  // unreachable
      chosen = bit->second;
      reuse = instances_.at(chosen.str());
      reuse->sched_busy = true;
      ++reuse->events_handled;
    }
  }
  retire_names(retired);

  if (fresh) {
    auto reg = registry_.register_local(chosen);
    if (!reg) {
      std::lock_guard lk(mu_);
      instances_.erase(chosen.str());
      auto it = reactive_.find(definition);
      if (it != reactive_.end()) {
        it->second.sched.on_gone(fresh->sched_id);
        it->second.by_slot.erase(fresh->sched_id);
      }
      return reg.error();
    }
    fresh->incarnation = *reg;
    log_->lifecycle(LifecycleEvent::spawn, chosen.str(), definition);
    enqueue(std::move(fresh));
    return chosen;
  }

  Envelope env;
  env.sender = AtomName::unchecked(kGatewaySender);
  env.destination = chosen;
  env.ordering = Ordering::Fifo;
  env.correlation_id = ev.correlation;
  env.payload = encode_event_payload(ev);
  bool wake = false;
  bool accepted = false;
  {
    std::lock_guard lk(reuse->mu);
    if (reuse->state != InstanceState::Stopped && reuse->state != InstanceState::Faulted) {
      accepted = reuse->mailbox.push(std::move(env));
      if (accepted && reuse->waiting) {
        reuse->waiting = false;
        ++reuse->wait_epoch;
        wake = true;
      }
    }
  }
  if (!accepted) router_.stats().overflow_drops.fetch_add(1, std::memory_order_relaxed);
  if (wake) enqueue(std::move(reuse));
  return chosen;
}

bool Engine::deliver_local(Envelope env) {
  auto inst = find(env.destination);
  auto& stats = router_.stats();
  if (!inst) {
    stats.unknown_drops.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  if (env.dest_incarnation != 0 && env.dest_incarnation != inst->incarnation) {
    stats.stale_drops.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  bool wake = false;
  {
    std::lock_guard lk(inst->mu);
    if (inst->state == InstanceState::Stopped || inst->state == InstanceState::Faulted) {
      stats.unknown_drops.fetch_add(1, std::memory_order_relaxed);
      return false;
    }
    if (!inst->mailbox.push(std::move(env))) {
      stats.overflow_drops.fetch_add(1, std::memory_order_relaxed);
      return false;
    }
    if (inst->waiting) {
      inst->waiting = false;
      ++inst->wait_epoch;
      wake = true;
    }
  }
  if (wake) enqueue(std::move(inst));
  return true;
}

void Engine::set_responder(Responder fn) {
  std::lock_guard lk(port_mu_);
  responder_ = std::move(fn);
}

void Engine::set_escalate_handler(EscalateHandler fn) {
  std::lock_guard lk(port_mu_);
  escalate_ = std::move(fn);
}

std::vector<std::pair<EventRoute, std::string>> Engine::routes() const {
  std::lock_guard lk(mu_);
  std::vector<std::pair<EventRoute, std::string>> out;
  for (const auto& def : reactive_order_) {
    auto it = reactive_.find(def);
    if (it == reactive_.end()) continue;
    for (const auto& r : it->second.config.routes) out.emplace_back(r, def);
  }
  return out;
}

bool Engine::has_reactive(const std::string& definition) const {
  std::lock_guard lk(mu_);
  return reactive_.count(definition) != 0;
}

void Engine::tick() {
  std::vector<AtomName> names;
  {
    std::lock_guard lk(mu_);
    for (auto& [def, rd] : reactive_) {
      std::vector<uint64_t> retired_slots;
      rd.sched.on_tick(clock_->now(), retired_slots);
      auto ns = slots_to_names(rd, retired_slots);
      names.insert(names.end(), ns.begin(), ns.end());
    }
  }
  retire_names(names);
}

void Engine::wait_idle() {
  std::unique_lock lk(run_mu_);
  idle_cv_.wait(lk, [&] { return run_queue_.empty() && active_ == 0; });
}

std::size_t Engine::live_instance_count() const {
  std::lock_guard lk(mu_);
  return instances_.size();
}

std::optional<InstanceState> Engine::instance_state(const AtomName& name) const {
  auto inst = find(name);
  if (!inst) return std::nullopt;
  std::lock_guard lk(inst->mu);
  return inst->state;
}

std::optional<uint64_t> Engine::instance_incarnation(const AtomName& name) const {
  auto inst = find(name);
  if (!inst) return std::nullopt;
  return inst->incarnation;
}

void Engine::enqueue(std::shared_ptr<Instance> inst) {
  {
    std::lock_guard lk(run_mu_);
    run_queue_.push_back(std::move(inst));
  }
  run_cv_.notify_one();
}

void Engine::worker_main() {
  while (true) {
    std::shared_ptr<Instance> inst;
    {
      std::unique_lock lk(run_mu_);
      run_cv_.wait(lk, [&] { return stopping_.load() || !run_queue_.empty(); });
      if (run_queue_.empty()) {
        if (stopping_.load()) return;
        continue;
      }
      inst = std::move(run_queue_.front());
      run_queue_.pop_front();
      ++active_;
    }
    resume_one(inst);
    drain_done();
    {
      std::lock_guard lk(run_mu_);
      --active_;
      if (run_queue_.empty() && active_ == 0) idle_cv_.notify_all();
    }
  }
}

void Engine::resume_one(const std::shared_ptr<Instance>& inst) {
  {
    std::lock_guard lk(inst->mu);
    if (inst->running) {
      // Single-threaded-atom guard; never expected to trip.
      reentrancy_violations_.fetch_add(1, std::memory_order_relaxed);
      return;
    }
    if (inst->state == InstanceState::Stopped || inst->state == InstanceState::Faulted) return;
    inst->running = true;
    inst->state = InstanceState::Busy;
  }
  // After resume() returns the frame may be running elsewhere or finalized;
  // completion is reported through the done-list, never read off the handle.
  inst->task.handle.resume();
}

void Engine::note_done(Instance* inst) {
  auto sp = inst->self.lock();
  if (!sp) return;
  std::lock_guard lk(done_mu_);
  done_.push_back(std::move(sp));
}

void Engine::drain_done() {
  std::vector<std::shared_ptr<Instance>> batch;
  {
    std::lock_guard lk(done_mu_);
    batch.swap(done_);
  }
  for (auto& inst : batch) finalize(inst);
}

void Engine::finalize(const std::shared_ptr<Instance>& inst) {
  std::exception_ptr fault = inst->task.handle.promise().fault;
  {
    std::lock_guard lk(inst->mu);
    inst->running = false;
  }
  if (fault) {
    handle_fault(inst, describe_fault(fault));
    return;
  }
  bool retired;
  {
    std::lock_guard lk(inst->mu);
    retired = inst->retire_requested;
  }
  remove_instance(inst, InstanceState::Stopped,
                  retired ? LifecycleEvent::expire : LifecycleEvent::exit_);
}

void Engine::fail_pending_events(const std::shared_ptr<Instance>& inst, const char* why) {
  std::vector<CorrelationId> dead;
  {
    std::lock_guard lk(inst->mu);
    dead.swap(inst->active_corrs);
    for (auto& env : inst->mailbox.drain())
      if (env.correlation_id && is_event_envelope(env)) dead.push_back(*env.correlation_id);
  }
  if (dead.empty()) return;
  Responder fn;
  {
    std::lock_guard lk(port_mu_);
    fn = responder_;
  }
  if (!fn) return;
  for (const auto& c : dead) fn(c, 500, std::string(why));
}

void Engine::handle_fault(const std::shared_ptr<Instance>& inst, const std::string& what) {
  log_->lifecycle(LifecycleEvent::fault, inst->name.str(), inst->definition);
  log_->info("fault detail: atom " + inst->name.str() + ": " + what);
  fail_pending_events(inst, "atom fault");
  switch (inst->recovery) {
    case RecoveryPolicy::None:
      remove_instance(inst, InstanceState::Faulted, std::nullopt);
      return;
    case RecoveryPolicy::Escalate: {
      EscalateHandler fn;
      {
        std::lock_guard lk(port_mu_);
        fn = escalate_;
      }
      if (fn) fn(inst->name, what);
      // Only reached with an injected handler (tests): contain like None.
      remove_instance(inst, InstanceState::Faulted, std::nullopt);
      return;
    }
    case RecoveryPolicy::Restart:
      restart_instance(inst);
      return;
    case RecoveryPolicy::Recover: {
      bool ok = false;
      if (inst->behavior.recover) {
        try {
          ok = bool(inst->behavior.recover(inst->ctx));
        } catch (...) {
          ok = false;
        }
      }
      if (ok)
        restart_instance(inst);
      else
        remove_instance(inst, InstanceState::Faulted, std::nullopt);
      return;
    }
  }
}

void Engine::restart_instance(const std::shared_ptr<Instance>& inst) {
  registry_.deregister_local(inst->name);
  auto reg = registry_.register_local(inst->name);
  if (!reg) {
    remove_instance(inst, InstanceState::Faulted, std::nullopt);
    return;
  }
  {
    std::lock_guard lk(inst->mu);
    inst->mailbox.clear();
    inst->waiting = false;
    inst->retire_requested = false;
    inst->exiting = false;
    ++inst->wait_epoch;
    inst->state = InstanceState::Starting;
  }
  {
    std::lock_guard lk(mu_);
    inst->events_handled = 0;
  }
  inst->incarnation = *reg;
  inst->task = inst->behavior.main(inst->ctx, std::nullopt);
  inst->task.handle.promise().engine = this;
  inst->task.handle.promise().inst = inst.get();
  log_->lifecycle(LifecycleEvent::restart, inst->name.str(), inst->definition);
  enqueue(inst);
  // The event it was serving died with the fault; free its scheduler slot so a
  // reactive instance can be assigned work (or expire) again.
  note_event_complete(inst.get());
}

void Engine::remove_instance(const std::shared_ptr<Instance>& inst, InstanceState final_state,
                             std::optional<LifecycleEvent> ev) {
  fail_pending_events(inst, "atom gone");
  {
    std::lock_guard lk(mu_);
    instances_.erase(inst->name.str());
    if (inst->kind == AtomKind::Reactive) {
      auto it = reactive_.find(inst->definition);
      if (it != reactive_.end()) {
        it->second.sched.on_gone(inst->sched_id);
        it->second.by_slot.erase(inst->sched_id);
      }
    }
  }
  registry_.deregister_local(inst->name);
  {
    std::lock_guard lk(inst->mu);
    inst->state = final_state;
    inst->mailbox.clear();
  }
  if (ev) log_->lifecycle(*ev, inst->name.str(), inst->definition);
  inst->task = GuestTask{};  // destroys the parked frame
}

void Engine::retire_instance(const AtomName& name) {
  auto inst = find(name);
  if (!inst) return;
  bool wake = false;
  {
    std::lock_guard lk(inst->mu);
    inst->retire_requested = true;
    if (inst->waiting) {
      inst->waiting = false;
      ++inst->wait_epoch;
      wake = true;
    }
  }
  if (wake) enqueue(std::move(inst));
}

void Engine::retire_names(const std::vector<AtomName>& names) {
  for (const auto& n : names) retire_instance(n);
}

void Engine::note_event_complete(Instance* inst) {
  std::vector<AtomName> retired;
  {
    std::lock_guard lk(mu_);
    if (!inst->sched_busy) return;
    inst->sched_busy = false;
    auto it = reactive_.find(inst->definition);
    if (it == reactive_.end()) return;
    std::vector<uint64_t> retired_slots;
    it->second.sched.on_complete(inst->sched_id, clock_->now(), retired_slots);
    retired = slots_to_names(it->second, retired_slots);
  }
  retire_names(retired);
}

void Engine::register_wait(std::weak_ptr<Instance> inst, uint64_t epoch, MonoTime deadline) {
  {
    std::lock_guard lk(timer_mu_);
    waits_.push(WaitEntry{deadline, std::move(inst), epoch});
  }
  timer_cv_.notify_one();
}

void Engine::expire_wait(const WaitEntry& e) {
  auto inst = e.inst.lock();
  if (!inst) return;
  bool wake = false;
  {
    std::lock_guard lk(inst->mu);
    if (inst->waiting && inst->wait_epoch == e.epoch) {
      inst->waiting = false;
      ++inst->wait_epoch;
      wake = true;
    }
  }
  if (wake) enqueue(std::move(inst));
}

void Engine::timer_main() {
  std::unique_lock lk(timer_mu_);
  while (!stopping_.load()) {
    auto cap = std::chrono::milliseconds(50);
    if (!waits_.empty()) {
      auto until = std::chrono::duration_cast<std::chrono::milliseconds>(
          waits_.top().deadline - clock_->now());
      if (until < cap) cap = std::max(until, std::chrono::milliseconds(0));
    }
    if (cap.count() > 0) timer_cv_.wait_for(lk, cap);
    if (stopping_.load()) return;
    MonoTime now = clock_->now();
    std::vector<WaitEntry> due;
    while (!waits_.empty() && waits_.top().deadline <= now) {
      due.push_back(waits_.top());
      waits_.pop();
    }
    lk.unlock();
    for (const auto& e : due) expire_wait(e);
    tick();
    lk.lock();
  }
}

}  // namespace radon
