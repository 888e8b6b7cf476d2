#pragma once

#include <atomic>
#include <condition_variable>
#include <coroutine>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "radon/clock.hpp"
#include "radon/config.hpp"
#include "radon/logging.hpp"
#include "radon/mailbox.hpp"
#include "radon/message.hpp"
#include "radon/registry.hpp"
#include "radon/result.hpp"
#include "radon/router.hpp"
#include "radon/scheduler.hpp"
#include "radon/storage.hpp"

namespace radon {

class Engine;
class AtomContext;
struct Instance;

// Guest activations are single top-level coroutines: behaviors co_await only
// the awaiters handed out by AtomContext, never other GuestTasks. Locals with
// nontrivial destructors must not touch the runtime from those destructors.
//
// A worker must not touch the coroutine handle once resume() returns: the
// instance may already be running on another worker. Completion is therefore
// reported from inside the final suspend point, while the frame is provably
// suspended, and the reporting worker finalizes it from its done-list.
struct GuestTask {
  struct promise_type {
    std::exception_ptr fault;
    Engine* engine = nullptr;
    Instance* inst = nullptr;

    struct FinalAwaiter {
      bool await_ready() noexcept { return false; }
      void await_suspend(std::coroutine_handle<promise_type> h) noexcept;
      void await_resume() noexcept {}
    };

    GuestTask get_return_object() {
      return GuestTask{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    FinalAwaiter final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { fault = std::current_exception(); }
  };

  using Handle = std::coroutine_handle<promise_type>;

  GuestTask() = default;
  explicit GuestTask(Handle h) : handle(h) {}
  GuestTask(GuestTask&& o) noexcept : handle(o.handle) { o.handle = {}; }
  GuestTask& operator=(GuestTask&& o) noexcept {
    if (this != &o) {
      if (handle) handle.destroy();
      handle = o.handle;
      o.handle = {};
    }
    return *this;
  }
  GuestTask(const GuestTask&) = delete;
  GuestTask& operator=(const GuestTask&) = delete;
  ~GuestTask() {
    if (handle) handle.destroy();
  }

  Handle handle{};
};

using GuestMain = std::function<GuestTask(AtomContext&, std::optional<Event>)>;
// Recovery hook for the Recover policy: runs synchronously in a fresh
// activation context before the restart; must not call receive.
using RecoverHook = std::function<Result<void>(AtomContext&)>;

struct Behavior {
  GuestMain main;
  RecoverHook recover;
};

// Loads behaviors by definition name. The required implementation resolves
// names against a catalog of behaviors compiled into the node binary.
class ModuleEngine {
 public:
  virtual ~ModuleEngine() = default;
  virtual Result<Behavior> load(const std::string& definition) = 0;
};

class InProcessModules : public ModuleEngine {
 public:
  Result<void> add(const std::string& definition, GuestMain main, RecoverHook recover = nullptr);
  Result<Behavior> load(const std::string& definition) override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Behavior> defs_;
};

enum class InstanceState : uint8_t { Starting, Idle, Busy, Stopped, Faulted };

// Awaitable returned by AtomContext::receive(). Resolves to the next
// envelope, a timeout error, or a stopped error when the instance is being
// retired or has called exit().
class ReceiveAwaiter {
 public:
  bool await_ready();
  bool await_suspend(std::coroutine_handle<> h);
  Result<Envelope> await_resume();

 private:
  friend class AtomContext;
  ReceiveAwaiter(Engine* engine, Instance* inst,
                 std::optional<std::chrono::milliseconds> timeout)
      : engine_(engine), inst_(inst), timeout_(timeout) {}

  enum class Outcome : uint8_t { Undecided, Got, Timeout, Stopped };

  Engine* engine_;
  Instance* inst_;
  std::optional<std::chrono::milliseconds> timeout_;
  Outcome outcome_ = Outcome::Undecided;
  std::optional<Envelope> env_;
};

// The runtime interface handed to guest behaviors. Every call is made from
// the instance's own activation; the engine keeps one activation per
// instance, so no call races another call on the same context.
class AtomContext {
 public:
  const AtomName& self_name() const;
  uint64_t incarnation() const;

  void exit();
  Result<void> send(const DestinationSelector& dest, Ordering ordering, std::string payload);
  ReceiveAwaiter receive(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  Result<std::vector<AtomName>> resolve(const std::string& query, NameSpace space);
  Result<void> alias_add(const Alias& alias, const AtomName& member);
  Result<void> alias_remove(const Alias& alias, const AtomName& member);
  Result<std::optional<std::string>> storage_get(const std::string& key);
  Result<void> storage_set(const std::string& key, const std::string& value);
  Result<void> storage_del(const std::string& key);
  // Keys under `prefix`, sorted. Backs the KV app's local rebalance scan.
  Result<std::vector<std::string>> storage_scan(const std::string& prefix);
  Result<void> respond(const CorrelationId& correlation, int status, std::string body);
  // Reactive instances: marks the current event handled so the next one can
  // be scheduled here. Idempotent between events.
  void event_complete();
  std::chrono::system_clock::time_point now() const;
  std::string random_bytes(std::size_t n) const;

 private:
  friend class Engine;
  friend class ReceiveAwaiter;
  Engine* engine_ = nullptr;
  Instance* inst_ = nullptr;
};

// One hosted atom. The engine's map owns it via shared_ptr; mu guards the
// mailbox and wake state, everything scheduler-related is guarded by the
// engine mutex.
struct Instance {
  AtomName name;
  std::string definition;
  AtomKind kind = AtomKind::Daemon;
  RecoveryPolicy recovery = RecoveryPolicy::None;
  uint64_t incarnation = 0;
  uint64_t sched_id = 0;  // reactive slot id, 0 for daemons
  std::weak_ptr<Instance> self;

  std::mutex mu;
  Mailbox mailbox;
  // Correlations of events handed to the guest and not yet responded to;
  // faults answer them with 500 so a gateway waiter never hangs out its
  // full timeout. Usually at most one, but a guest that pops a queued
  // event-envelope before responding to the current event holds several.
  std::vector<CorrelationId> active_corrs;
  InstanceState state = InstanceState::Starting;
  bool waiting = false;
  bool running = false;
  bool retire_requested = false;
  bool exiting = false;
  uint64_t wait_epoch = 0;

  // engine-mutex domain
  bool sched_busy = false;
  uint64_t events_handled = 0;

  Behavior behavior;
  GuestTask task;
  AtomContext ctx;
};

// Node-local atom host: owns instances, the worker pool that resumes guest
// activations, the per-definition schedulers, and fault handling.
class Engine {
 public:
  struct Options {
    std::string node_id = "local";
    std::set<std::string> tags;
    std::size_t workers = 0;  // 0: hardware_concurrency clamped to [2, 8]
    Store* store = nullptr;
    ClockSource* clock = nullptr;  // defaults to the steady clock
    Logger* logger = nullptr;
  };

  using Responder = std::function<bool(const CorrelationId&, int, std::string)>;
  using EscalateHandler = std::function<void(const AtomName&, const std::string& what)>;

  Engine(Registry& registry, Router& router, Options opts);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void start();
  void stop();

  Result<void> register_definition(const std::string& name, GuestMain main,
                                   RecoverHook recover = nullptr);

  Result<AtomName> spawn_daemon(const AtomConfiguration& config);
  Result<void> install_reactive(const AtomConfiguration& config);
  Result<AtomName> dispatch_event(const std::string& definition, Event ev);

  // Ingress port for the router: returns true when the envelope was accepted
  // into the destination mailbox.
  bool deliver_local(Envelope env);

  void set_responder(Responder fn);
  void set_escalate_handler(EscalateHandler fn);

  // (route, definition) pairs in install order, for gateway routing tables.
  std::vector<std::pair<EventRoute, std::string>> routes() const;
  bool has_reactive(const std::string& definition) const;

  // Runs one scheduler expiry pass immediately (the timer thread does this
  // on its own cadence).
  void tick();
  // Blocks until no activation is queued or running. Quiescence for tests.
  void wait_idle();

  std::size_t live_instance_count() const;
  std::optional<InstanceState> instance_state(const AtomName& name) const;
  std::optional<uint64_t> instance_incarnation(const AtomName& name) const;
  // Overlapping-activation attempts observed (single-threaded-atom guard).
  uint64_t reentrancy_violations() const { return reentrancy_violations_.load(); }

  ClockSource& clock() { return *clock_; }
  const std::string& node_id() const { return node_id_; }
  const std::set<std::string>& tags() const { return tags_; }

 private:
  friend class AtomContext;
  friend class ReceiveAwaiter;
  friend struct GuestTask::promise_type;

  struct ReactiveDef {
    AtomConfiguration config;
    ReactiveScheduler sched;
    std::map<uint64_t, AtomName> by_slot;
  };

  struct WaitEntry {
    MonoTime deadline;
    std::weak_ptr<Instance> inst;
    uint64_t epoch;
    bool operator>(const WaitEntry& o) const { return deadline > o.deadline; }
  };

  std::shared_ptr<Instance> make_instance(AtomName name, const std::string& definition,
                                          AtomKind kind, RecoveryPolicy recovery,
                                          Behavior behavior, std::optional<Event> initial);
  std::shared_ptr<Instance> find(const AtomName& name) const;
  void enqueue(std::shared_ptr<Instance> inst);
  void worker_main();
  void timer_main();
  void resume_one(const std::shared_ptr<Instance>& inst);
  void finalize(const std::shared_ptr<Instance>& inst);
  void handle_fault(const std::shared_ptr<Instance>& inst, const std::string& what);
  // Answers the active event plus every queued event-envelope with 500;
  // called when an instance discards its pending work.
  void fail_pending_events(const std::shared_ptr<Instance>& inst, const char* why);
  void restart_instance(const std::shared_ptr<Instance>& inst);
  void remove_instance(const std::shared_ptr<Instance>& inst, InstanceState final_state,
                       std::optional<LifecycleEvent> ev);
  void retire_instance(const AtomName& name);
  void retire_names(const std::vector<AtomName>& names);
  std::vector<AtomName> slots_to_names(ReactiveDef& rd, const std::vector<uint64_t>& slots);
  void note_event_complete(Instance* inst);
  void register_wait(std::weak_ptr<Instance> inst, uint64_t epoch, MonoTime deadline);
  void expire_wait(const WaitEntry& e);
  void note_done(Instance* inst);
  void drain_done();

  Registry& registry_;
  Router& router_;
  std::string node_id_;
  std::set<std::string> tags_;
  Store* store_;
  SteadyClock default_clock_;
  ClockSource* clock_;
  Logger default_logger_;
  Logger* log_;
  std::size_t worker_count_;

  InProcessModules modules_;

  mutable std::mutex mu_;  // instances_, reactive_, sched_busy/events_handled
  std::map<std::string, std::shared_ptr<Instance>> instances_;
  std::map<std::string, ReactiveDef> reactive_;
  std::vector<std::string> reactive_order_;

  std::mutex run_mu_;
  std::condition_variable run_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::shared_ptr<Instance>> run_queue_;
  std::size_t active_ = 0;

  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::priority_queue<WaitEntry, std::vector<WaitEntry>, std::greater<>> waits_;

  std::mutex done_mu_;
  std::vector<std::shared_ptr<Instance>> done_;

  std::atomic<uint64_t> reentrancy_violations_{0};
  std::atomic<bool> stopping_{false};
  bool started_ = false;
  std::vector<std::thread> workers_;
  std::thread timer_;

  Responder responder_;
  EscalateHandler escalate_;
  std::mutex port_mu_;  // responder_/escalate_ swaps
};

}  // namespace radon
