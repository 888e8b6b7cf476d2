#include "radon/engine.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <random>
#include <semaphore>
#include <thread>
#include <vector>

#include "doctest.h"

using namespace radon;
using namespace std::chrono_literals;

namespace {

AtomName nm(const char* s) { return AtomName::parse(s).value(); }

template <typename F>
bool eventually(F&& f, std::chrono::milliseconds limit = 3000ms) {
  auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    if (f()) return true;
    std::this_thread::sleep_for(2ms);
  }
  return f();
}

AtomConfiguration daemon_cfg(std::string def, std::string name,
                             RecoveryPolicy rec = RecoveryPolicy::None) {
  AtomConfiguration c;
  c.definition = std::move(def);
  c.kind = AtomKind::Daemon;
  c.name = std::move(name);
  c.recovery = rec;
  return c;
}

AtomConfiguration reactive_cfg(std::string def, SchedulingPolicy pol,
                               RecoveryPolicy rec = RecoveryPolicy::None) {
  AtomConfiguration c;
  c.definition = def;
  c.kind = AtomKind::Reactive;
  c.scheduling = pol;
  c.recovery = rec;
  c.routes.push_back({"GET", "/" + def + "/"});
  return c;
}

Event make_event(const char* path, uint8_t tag = 0) {
  Event e;
  e.method = "GET";
  e.path = path;
  e.correlation.bytes[0] = tag;
  return e;
}

struct EngineRig {
  Registry registry{"n1"};
  Router router{registry, "n1"};
  ManualClock manual;
  std::mutex log_mu;
  std::vector<std::string> log_lines;
  Logger logger;
  Engine engine;

  explicit EngineRig(bool manual_clock = false, Store* store = nullptr)
      : logger([this](std::string_view l) {
          std::lock_guard lk(log_mu);
          log_lines.emplace_back(l);
        }),
        engine(registry, router, make_opts(manual_clock, store)) {
    router.set_local_deliver([this](Envelope e) { return engine.deliver_local(std::move(e)); });
    engine.start();
  }
  ~EngineRig() { engine.stop(); }

  Engine::Options make_opts(bool manual_clock, Store* store) {
    Engine::Options o;
    o.node_id = "n1";
    o.store = store;
    o.clock = manual_clock ? &manual : nullptr;
    o.logger = &logger;
    return o;
  }

  std::size_t count_log(const std::string& needle) {
    std::lock_guard lk(log_mu);
    std::size_t n = 0;
    for (const auto& l : log_lines)
      if (l.find(needle) != std::string::npos) ++n;
    return n;
  }

  Result<void> send_to(const char* dest, const char* payload) {
    return router.send(nm("tester"), DestExact{nm(dest)}, Ordering::Fifo, payload);
  }
};

}  // namespace

TEST_CASE("a daemon receives messages in order and exits cleanly") {
  std::mutex m;
  std::vector<std::string> got;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("collector",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     for (;;) {
                                       auto r = co_await ctx.receive();
                                       if (!r) break;
                                       {
                                         std::lock_guard lk(m);
                                         got.push_back(r.value().payload);
                                       }
                                       if (r.value().payload == "stop") co_return;
                                     }
                                   })
              .ok());
  auto name = rig.engine.spawn_daemon(daemon_cfg("collector", "col1"));
  REQUIRE(name.ok());
  CHECK(name.value().str() == "col1");
  CHECK(eventually([&] { return rig.registry.is_live(nm("col1")); }));

  for (const char* p : {"m1", "m2", "m3", "stop"}) REQUIRE(rig.send_to("col1", p).ok());

  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  {
    std::lock_guard lk(m);
    CHECK(got == std::vector<std::string>{"m1", "m2", "m3", "stop"});
  }
  CHECK(!rig.registry.is_live(nm("col1")));  // exit releases the name
  CHECK(rig.count_log("event=spawn atom=col1") == 1);
  CHECK(rig.count_log("event=exit atom=col1") == 1);
  CHECK(rig.engine.reentrancy_violations() == 0);
}

TEST_CASE("daemons talk to each other by name") {
  std::mutex m;
  std::string reply;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("echoer",
                                   [](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto r = co_await ctx.receive();
                                     if (r)
                                       (void)ctx.send(DestExact{r.value().sender}, Ordering::Fifo,
                                                      "re:" + r.value().payload);
                                   })
              .ok());
  REQUIRE(rig.engine
              .register_definition("asker",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     (void)ctx.send(DestExact{nm("echo1")}, Ordering::Fifo,
                                                    "hello");
                                     auto r = co_await ctx.receive();
                                     if (r) {
                                       std::lock_guard lk(m);
                                       reply = r.value().payload;
                                     }
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("echoer", "echo1")).ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("asker", "ask1")).ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  std::lock_guard lk(m);
  CHECK(reply == "re:hello");
}

TEST_CASE("receive times out and a zero timeout polls") {
  std::atomic<bool> timed_out{false};
  std::atomic<bool> zero_polled{false};
  std::atomic<bool> got_real{false};
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("timeouter",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto r0 = co_await ctx.receive(0ms);
                                     zero_polled = !r0 && r0.error().code == Errc::timeout;
                                     auto r1 = co_await ctx.receive();
                                     got_real = r1.ok() && r1.value().payload == "real";
                                     auto r2 = co_await ctx.receive(40ms);
                                     timed_out = !r2 && r2.error().code == Errc::timeout;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("timeouter", "t1")).ok());
  CHECK(eventually([&] { return zero_polled.load(); }));
  REQUIRE(rig.send_to("t1", "real").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(got_real.load());
  CHECK(timed_out.load());
}

TEST_CASE("exit makes pending receives return stopped") {
  std::atomic<bool> saw_stopped{false};
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("quitter",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     ctx.exit();
                                     auto r = co_await ctx.receive();
                                     saw_stopped = !r && r.error().code == Errc::stopped;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("quitter", "q1")).ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(saw_stopped.load());
}

TEST_CASE("a fault without recovery removes the instance") {
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("crasher",
                                   [](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto r = co_await ctx.receive();
                                     (void)r;
                                     throw std::runtime_error("boom");
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("crasher", "c1", RecoveryPolicy::None)).ok());
  REQUIRE(rig.send_to("c1", "go").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(!rig.registry.is_live(nm("c1")));
  CHECK(rig.count_log("event=fault atom=c1") == 1);
  CHECK(rig.count_log("event=restart") == 0);
}

TEST_CASE("restart recovery reincarnates the atom with a cleared mailbox") {
  std::atomic<int> spawn_count{0};
  std::binary_semaphore ready{0}, gate{0};
  std::mutex m;
  std::vector<std::string> seen_after_restart;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition(
                  "phoenix",
                  [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                    int n = ++spawn_count;
                    if (n == 1) {
                      auto r = co_await ctx.receive();  // "die"
                      (void)r;
                      ready.release();
                      gate.acquire();
                      throw std::runtime_error("boom");
                    }
                    for (;;) {
                      auto r = co_await ctx.receive();
                      if (!r) co_return;
                      {
                        std::lock_guard lk(m);
                        seen_after_restart.push_back(r.value().payload);
                      }
                      if (r.value().payload == "probe") co_return;
                    }
                  })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("phoenix", "p1", RecoveryPolicy::Restart)).ok());
  CHECK(rig.engine.instance_incarnation(nm("p1")) == 1);

  REQUIRE(rig.send_to("p1", "die").ok());
  ready.acquire();  // guest holds "die", is about to fault
  REQUIRE(rig.send_to("p1", "leftover").ok());  // queued behind the fault
  gate.release();

  CHECK(eventually([&] { return spawn_count.load() == 2; }));
  CHECK(rig.engine.instance_incarnation(nm("p1")) == 2);
  CHECK(rig.registry.is_live(nm("p1")));
  REQUIRE(rig.send_to("p1", "probe").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  {
    std::lock_guard lk(m);
    // The restarted incarnation never sees what was queued before the fault.
    CHECK(seen_after_restart == std::vector<std::string>{"probe"});
  }
  CHECK(rig.count_log("event=fault atom=p1") == 1);
  CHECK(rig.count_log("event=restart atom=p1") == 1);
  CHECK(rig.engine.reentrancy_violations() == 0);
}

TEST_CASE("recover runs the hook before the restart") {
  std::mutex m;
  std::vector<std::string> order;
  auto push = [&](const char* s) {
    std::lock_guard lk(m);
    order.emplace_back(s);
  };
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition(
                  "healer",
                  [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                    push("main");
                    auto r = co_await ctx.receive();
                    if (!r) co_return;
                    if (r.value().payload == "die") throw std::runtime_error("boom");
                  },
                  [&](AtomContext&) -> Result<void> {
                    push("hook");
                    return {};
                  })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("healer", "h1", RecoveryPolicy::Recover)).ok());
  REQUIRE(rig.send_to("h1", "die").ok());
  CHECK(eventually([&] {
    std::lock_guard lk(m);
    return order.size() >= 3;
  }));
  {
    std::lock_guard lk(m);
    CHECK(order == std::vector<std::string>{"main", "hook", "main"});
  }
  CHECK(rig.registry.is_live(nm("h1")));
  REQUIRE(rig.send_to("h1", "bye").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
}

TEST_CASE("a failing recover hook removes the instance") {
  std::atomic<int> hook_runs{0};
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition(
                  "unhealable",
                  [](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                    auto r = co_await ctx.receive();
                    (void)r;
                    throw std::runtime_error("boom");
                  },
                  [&](AtomContext&) -> Result<void> {
                    ++hook_runs;
                    return make_error(Errc::io_error, "cannot heal");
                  })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("unhealable", "u1", RecoveryPolicy::Recover)).ok());
  REQUIRE(rig.send_to("u1", "go").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(hook_runs.load() == 1);
  CHECK(!rig.registry.is_live(nm("u1")));
  CHECK(rig.count_log("event=restart") == 0);
}

TEST_CASE("escalate hands the fault to the node-stop handler") {
  std::mutex m;
  std::vector<std::string> escalated;
  EngineRig rig;
  rig.engine.set_escalate_handler([&](const AtomName& n, const std::string& what) {
    std::lock_guard lk(m);
    escalated.push_back(n.str() + ":" + what);
  });
  REQUIRE(rig.engine
              .register_definition("fatal",
                                   [](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto r = co_await ctx.receive();
                                     (void)r;
                                     throw std::runtime_error("unrecoverable");
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("fatal", "f1", RecoveryPolicy::Escalate)).ok());
  REQUIRE(rig.send_to("f1", "go").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  std::lock_guard lk(m);
  REQUIRE(escalated.size() == 1);
  CHECK(escalated[0] == "f1:unrecoverable");
}

TEST_CASE("guests can manage aliases and resolve names") {
  std::atomic<bool> all_ok{false};
  auto grp = Alias::parse("grp").value();
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("aliaser",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto a = ctx.alias_add(grp, ctx.self_name());
                                     auto byname = ctx.resolve("ali.*", NameSpace::Names);
                                     auto bymember = ctx.resolve("grp", NameSpace::Aliases);
                                     all_ok = a.ok() && byname.ok() &&
                                              byname.value().size() == 1 &&
                                              byname.value()[0] == ctx.self_name() &&
                                              bymember.ok() && bymember.value().size() == 1;
                                     co_return;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("aliaser", "aliaser1")).ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(all_ok.load());
  // Exit pruned the membership.
  CHECK(rig.registry.alias_members(grp).empty());
}

TEST_CASE("guest storage round-trips through the node store") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() /
             ("engine-store-" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto store = Store::open(dir, Durability::Sync);
  REQUIRE(store.ok());

  std::atomic<bool> ok{false};
  {
    EngineRig rig(false, store.value().get());
    REQUIRE(rig.engine
                .register_definition("keeper",
                                     [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                       auto w = ctx.storage_set("k", "v");
                                       auto r = ctx.storage_get("k");
                                       auto miss = ctx.storage_get("absent");
                                       ok = w.ok() && r.ok() && r.value() == "v" &&
                                            miss.ok() && !miss.value().has_value();
                                       co_return;
                                     })
                .ok());
    REQUIRE(rig.engine.spawn_daemon(daemon_cfg("keeper", "k1")).ok());
    CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  }
  CHECK(ok.load());
  CHECK(store.value()->get("k").value() == "v");
  std::error_code ec;
  store.value().reset();
  fs::remove_all(dir, ec);
}

TEST_CASE("storage without a store reports unavailable") {
  std::atomic<bool> ok{false};
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("storeless",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto w = ctx.storage_set("k", "v");
                                     auto r = ctx.storage_get("k");
                                     ok = !w && w.error().code == Errc::unavailable && !r &&
                                          r.error().code == Errc::unavailable;
                                     co_return;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("storeless", "s1")).ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(ok.load());
}

TEST_CASE("random bytes come back distinct and sized") {
  std::mutex m;
  std::vector<std::string> blobs;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("roller",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     std::lock_guard lk(m);
                                     blobs.push_back(ctx.random_bytes(32));
                                     blobs.push_back(ctx.random_bytes(32));
                                     co_return;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("roller", "r1")).ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  std::lock_guard lk(m);
  REQUIRE(blobs.size() == 2);
  CHECK(blobs[0].size() == 32);
  CHECK(blobs[1].size() == 32);
  CHECK(blobs[0] != blobs[1]);
}

TEST_CASE("spawn rejects duplicates, unknown definitions and foreign hosts") {
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("idler",
                                   [](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto r = co_await ctx.receive();
                                     (void)r;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("idler", "only")).ok());
  auto dup = rig.engine.spawn_daemon(daemon_cfg("idler", "only"));
  REQUIRE(!dup.ok());
  CHECK(dup.error().code == Errc::conflict);

  auto unknown = rig.engine.spawn_daemon(daemon_cfg("no-such-def", "x"));
  REQUIRE(!unknown.ok());
  CHECK(unknown.error().code == Errc::not_found);

  auto cfg = daemon_cfg("idler", "y");
  cfg.hosts = std::vector<std::string>{"other-node"};
  auto foreign = rig.engine.spawn_daemon(cfg);
  REQUIRE(!foreign.ok());
  CHECK(foreign.error().code == Errc::constraint_mismatch);

  // The template expands with this node's id.
  auto templ = rig.engine.spawn_daemon(daemon_cfg("idler", "svc/{node}"));
  REQUIRE(templ.ok());
  CHECK(templ.value().str() == "svc/n1");
}

TEST_CASE("stale and unknown envelopes are dropped with counts") {
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("idler",
                                   [](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     auto r = co_await ctx.receive();
                                     (void)r;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("idler", "b1")).ok());

  Envelope stale;
  stale.sender = nm("tester");
  stale.destination = nm("b1");
  stale.dest_incarnation = 99;
  CHECK(!rig.engine.deliver_local(stale));
  CHECK(rig.router.stats().stale_drops.load() == 1);

  Envelope unknown;
  unknown.sender = nm("tester");
  unknown.destination = nm("nobody");
  CHECK(!rig.engine.deliver_local(unknown));
  CHECK(rig.router.stats().unknown_drops.load() == 1);

  Envelope fine;
  fine.sender = nm("tester");
  fine.destination = nm("b1");
  fine.dest_incarnation = 0;  // engine-internal: unchecked
  CHECK(rig.engine.deliver_local(fine));
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
}

TEST_CASE("a full mailbox rejects further deliveries") {
  std::binary_semaphore ready{0}, gate{0};
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("slowpoke",
                                   [&](AtomContext& ctx, std::optional<Event>) -> GuestTask {
                                     ready.release();
                                     gate.acquire();
                                     auto r = co_await ctx.receive();
                                     (void)r;
                                     co_return;
                                   })
              .ok());
  REQUIRE(rig.engine.spawn_daemon(daemon_cfg("slowpoke", "slow1")).ok());
  ready.acquire();  // guest is mid-activation and consumes nothing

  std::size_t accepted = 0;
  for (std::size_t i = 0; i < kDefaultMailboxCapacity + 1; ++i) {
    Envelope e;
    e.sender = nm("tester");
    e.destination = nm("slow1");
    if (rig.engine.deliver_local(std::move(e))) ++accepted;
  }
  CHECK(accepted == kDefaultMailboxCapacity);
  CHECK(rig.router.stats().overflow_drops.load() == 1);
  gate.release();
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
}

TEST_CASE("one policy handles queued events in order on a single instance") {
  std::mutex m;
  std::vector<std::pair<std::string, std::string>> handled;
  std::vector<std::pair<uint8_t, std::string>> responses;
  EngineRig rig;
  rig.engine.set_responder([&](const CorrelationId& c, int status, std::string body) {
    std::lock_guard lk(m);
    responses.emplace_back(c.bytes[0], std::to_string(status) + ":" + body);
    return true;
  });
  REQUIRE(rig.engine
              .register_definition(
                  "seq",
                  [&](AtomContext& ctx, std::optional<Event> ev) -> GuestTask {
                    for (;;) {
                      if (ev) {
                        {
                          std::lock_guard lk(m);
                          handled.emplace_back(ctx.self_name().str(), ev->path);
                        }
                        (void)ctx.respond(ev->correlation, 200, "pong:" + ev->path);
                      }
                      ctx.event_complete();
                      auto r = co_await ctx.receive();
                      if (!r) break;
                      ev = as_event(r.value());
                    }
                  })
              .ok());
  REQUIRE(rig.engine.install_reactive(reactive_cfg("seq", PolicyOne{})).ok());
  CHECK(rig.engine.has_reactive("seq"));

  for (uint8_t i = 1; i <= 3; ++i) {
    auto r = rig.engine.dispatch_event("seq", make_event(i == 1 ? "/a" : i == 2 ? "/b" : "/c", i));
    REQUIRE(r.ok());
    CHECK(r.value().str() == "seq/n1/1");
  }
  rig.engine.wait_idle();
  {
    std::lock_guard lk(m);
    CHECK(handled == std::vector<std::pair<std::string, std::string>>{
                         {"seq/n1/1", "/a"}, {"seq/n1/1", "/b"}, {"seq/n1/1", "/c"}});
    REQUIRE(responses.size() == 3);
    CHECK(responses[0] == std::pair<uint8_t, std::string>{1, "200:pong:/a"});
    CHECK(responses[2] == std::pair<uint8_t, std::string>{3, "200:pong:/c"});
  }
  CHECK(rig.engine.live_instance_count() == 1);  // One keeps its instance
  CHECK(rig.engine.reentrancy_violations() == 0);
}

TEST_CASE("round robin spreads events over the instance limit") {
  std::mutex m;
  std::map<std::string, std::vector<std::string>> by_instance;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition(
                  "rr",
                  [&](AtomContext& ctx, std::optional<Event> ev) -> GuestTask {
                    for (;;) {
                      if (ev) {
                        std::lock_guard lk(m);
                        by_instance[ctx.self_name().str()].push_back(ev->path);
                      }
                      ctx.event_complete();
                      auto r = co_await ctx.receive();
                      if (!r) break;
                      ev = as_event(r.value());
                    }
                  })
              .ok());
  REQUIRE(rig.engine.install_reactive(reactive_cfg("rr", PolicyRoundRobin{2})).ok());
  for (const char* p : {"/1", "/2", "/3", "/4"})
    REQUIRE(rig.engine.dispatch_event("rr", make_event(p)).ok());
  rig.engine.wait_idle();
  {
    std::lock_guard lk(m);
    REQUIRE(by_instance.size() == 2);
    CHECK(by_instance["rr/n1/1"] == std::vector<std::string>{"/1", "/3"});
    CHECK(by_instance["rr/n1/2"] == std::vector<std::string>{"/2", "/4"});
  }
  CHECK(rig.engine.live_instance_count() == 2);
}

TEST_CASE("on demand runs concurrent events on separate instances") {
  std::mutex m;
  std::vector<std::pair<std::string, std::string>> started;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition(
                  "od",
                  [&](AtomContext& ctx, std::optional<Event> ev) -> GuestTask {
                    if (ev) {
                      {
                        std::lock_guard lk(m);
                        started.emplace_back(ctx.self_name().str(), ev->path);
                      }
                      auto r = co_await ctx.receive();  // hold until released
                      (void)r;
                    }
                    ctx.event_complete();
                    auto r2 = co_await ctx.receive();  // retires here
                    (void)r2;
                  })
              .ok());
  REQUIRE(rig.engine.install_reactive(reactive_cfg("od", PolicyOnDemand{})).ok());

  REQUIRE(rig.engine.dispatch_event("od", make_event("/a")).ok());
  REQUIRE(rig.engine.dispatch_event("od", make_event("/b")).ok());
  REQUIRE(rig.engine.dispatch_event("od", make_event("/c")).ok());

  CHECK(eventually([&] {
    std::lock_guard lk(m);
    return started.size() == 3;
  }));
  CHECK(rig.engine.live_instance_count() == 3);  // all overlapping
  {
    std::lock_guard lk(m);
    std::sort(started.begin(), started.end());
    CHECK(started == std::vector<std::pair<std::string, std::string>>{
                         {"od/n1/1", "/a"}, {"od/n1/2", "/b"}, {"od/n1/3", "/c"}});
  }
  for (const char* n : {"od/n1/1", "od/n1/2", "od/n1/3"}) REQUIRE(rig.send_to(n, "release").ok());
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(rig.engine.reentrancy_violations() == 0);
}

TEST_CASE("expire policy reuses a warm instance and retires it after the idle window") {
  std::mutex m;
  std::vector<std::pair<std::string, std::string>> handled;
  EngineRig rig(true);  // manual clock
  REQUIRE(rig.engine
              .register_definition(
                  "ode",
                  [&](AtomContext& ctx, std::optional<Event> ev) -> GuestTask {
                    for (;;) {
                      if (ev) {
                        std::lock_guard lk(m);
                        handled.emplace_back(ctx.self_name().str(), ev->path);
                      }
                      ctx.event_complete();
                      auto r = co_await ctx.receive();
                      if (!r) break;
                      ev = as_event(r.value());
                    }
                  })
              .ok());
  REQUIRE(rig.engine
              .install_reactive(reactive_cfg(
                  "ode", PolicyOnDemandExpire{std::chrono::milliseconds(5000), std::nullopt}))
              .ok());

  REQUIRE(rig.engine.dispatch_event("ode", make_event("/1")).ok());
  rig.engine.wait_idle();
  rig.manual.advance(1000ms);
  REQUIRE(rig.engine.dispatch_event("ode", make_event("/2")).ok());
  rig.engine.wait_idle();
  rig.manual.advance(6000ms);  // idle since t=1s, expired at t=6s
  REQUIRE(rig.engine.dispatch_event("ode", make_event("/3")).ok());
  rig.engine.wait_idle();

  {
    std::lock_guard lk(m);
    CHECK(handled == std::vector<std::pair<std::string, std::string>>{
                         {"ode/n1/1", "/1"}, {"ode/n1/1", "/2"}, {"ode/n1/2", "/3"}});
  }
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 1; }));
  CHECK(rig.count_log("event=expire atom=ode/n1/1") == 1);

  // The survivor expires via the periodic scheduler pass.
  rig.manual.advance(5000ms);
  rig.engine.tick();
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  CHECK(rig.count_log("event=expire atom=ode/n1/2") == 1);
}

TEST_CASE("expire policy retires after the event budget") {
  std::mutex m;
  std::vector<std::string> handled_by;
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition(
                  "budget",
                  [&](AtomContext& ctx, std::optional<Event> ev) -> GuestTask {
                    for (;;) {
                      if (ev) {
                        std::lock_guard lk(m);
                        handled_by.push_back(ctx.self_name().str());
                      }
                      ctx.event_complete();
                      auto r = co_await ctx.receive();
                      if (!r) break;
                      ev = as_event(r.value());
                    }
                  })
              .ok());
  REQUIRE(rig.engine
              .install_reactive(
                  reactive_cfg("budget", PolicyOnDemandExpire{std::nullopt, uint64_t{2}}))
              .ok());
  REQUIRE(rig.engine.dispatch_event("budget", make_event("/1")).ok());
  rig.engine.wait_idle();
  REQUIRE(rig.engine.dispatch_event("budget", make_event("/2")).ok());
  rig.engine.wait_idle();
  CHECK(eventually([&] { return rig.engine.live_instance_count() == 0; }));
  REQUIRE(rig.engine.dispatch_event("budget", make_event("/3")).ok());
  rig.engine.wait_idle();
  std::lock_guard lk(m);
  CHECK(handled_by ==
        std::vector<std::string>{"budget/n1/1", "budget/n1/1", "budget/n1/2"});
}

TEST_CASE("routing table lists installed routes in order") {
  EngineRig rig;
  REQUIRE(rig.engine
              .register_definition("ra",
                                   [](AtomContext&, std::optional<Event>) -> GuestTask {
                                     co_return;
                                   })
              .ok());
  REQUIRE(rig.engine
              .register_definition("rb",
                                   [](AtomContext&, std::optional<Event>) -> GuestTask {
                                     co_return;
                                   })
              .ok());
  REQUIRE(rig.engine.install_reactive(reactive_cfg("ra", PolicyOne{})).ok());
  REQUIRE(rig.engine.install_reactive(reactive_cfg("rb", PolicyOne{})).ok());

  auto dup = rig.engine.install_reactive(reactive_cfg("ra", PolicyOne{}));
  REQUIRE(!dup.ok());
  CHECK(dup.error().code == Errc::duplicate);

  auto routes = rig.engine.routes();
  REQUIRE(routes.size() == 2);
  CHECK(routes[0].first.path_prefix == "/ra/");
  CHECK(routes[0].second == "ra");
  CHECK(routes[1].second == "rb");

  auto missing = rig.engine.dispatch_event("nothing", make_event("/x"));
  REQUIRE(!missing.ok());
  CHECK(missing.error().code == Errc::not_found);
}
