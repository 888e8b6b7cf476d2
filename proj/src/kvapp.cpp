#include "radon/kvapp.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "radon/kvmsg.hpp"
#include "radon/kvring.hpp"

namespace radon {

namespace {

using namespace std::chrono_literals;

AtomName coordinator_name() { return AtomName::parse("coordinator").value(); }

CorrelationId fresh_correlation(AtomContext& ctx) {
  std::string raw = ctx.random_bytes(16);
  CorrelationId c;
  for (std::size_t i = 0; i < c.bytes.size(); ++i) c.bytes[i] = static_cast<uint8_t>(raw[i]);
  return c;
}

void send_response(AtomContext& ctx, const AtomName& to, const CorrelationId& corr,
                   std::variant<KvOk, KvNotFound, KvError> outcome) {
  KvResponse res;
  res.correlation = corr;
  res.outcome = std::move(outcome);
  (void)ctx.send(DestExact{to}, Ordering::Fifo, encode_kv(res));
}

uint32_t replication_from_store(AtomContext& ctx) {
  auto r = ctx.storage_get("kv/config/replication");
  if (r.ok() && r.value()) {
    uint32_t n = 0;
    const std::string& s = **r;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc{} && p == s.data() + s.size() && n >= 1) return n;
  }
  return 2;
}

}  // namespace

GuestTask coordinator_main(AtomContext& ctx, std::optional<Event>) {
  RingView view;
  view.replication = replication_from_store(ctx);

  for (;;) {
    auto env = co_await ctx.receive();
    if (!env.ok()) co_return;
    auto msg = decode_kv(env.value().payload);
    if (!msg) continue;

    if (const auto* join = std::get_if<KvJoin>(&*msg)) {
      bool changed = false;
      if (!view.contains(join->member)) {
        uint64_t h = ring_hash(join->member.str());
        bool collision = std::any_of(view.points.begin(), view.points.end(),
                                     [&](const RingPoint& p) { return p.hash == h; });
        if (!collision) {
          RingPoint p{h, join->member};
          view.points.insert(
              std::upper_bound(view.points.begin(), view.points.end(), p,
                               [](const RingPoint& a, const RingPoint& b) {
                                 return a.hash < b.hash;
                               }),
              std::move(p));
          ++view.version;
          changed = true;
        }
        // A hash collision would make placement ambiguous; the joiner is
        // rejected by replying the unchanged view, which never contains it.
      }
      std::string encoded = encode_kv(view);
      (void)ctx.send(DestExact{env.value().sender}, Ordering::Fifo, encoded);
      if (changed)
        for (const auto& p : view.points)
          (void)ctx.send(DestExact{p.member}, Ordering::Fifo, encoded);
    } else if (std::holds_alternative<KvTopology>(*msg)) {
      (void)ctx.send(DestExact{env.value().sender}, Ordering::Fifo, encode_kv(view));
    }
    // Ring members handle requests; anything else here is stray traffic.
  }
}

namespace {

// Re-homes local keys the new view assigns elsewhere: each one is written
// toward its new primary, then dropped locally. Acks come back as
// KvResponse messages the main loop ignores.
void kvnode_rebalance(AtomContext& ctx, const AtomName& self, const std::string& prefix,
                      const RingView& view) {
  auto keys = ctx.storage_scan(prefix);
  if (!keys.ok()) return;
  for (const auto& full_key : keys.value()) {
    std::string key = full_key.substr(prefix.size());
    auto resp = responsible_set(view, key);
    if (!resp.ok()) continue;
    if (std::find(resp.value().begin(), resp.value().end(), self) != resp.value().end())
      continue;
    auto value = ctx.storage_get(full_key);
    if (!value.ok() || !value.value()) continue;
    KvRequest req;
    req.op = KvPut{key, **value};
    req.reply_to = self;
    req.correlation = fresh_correlation(ctx);
    (void)ctx.send(DestExact{resp.value()[0]}, Ordering::Fifo, encode_kv(req));
    (void)ctx.storage_del(full_key);
  }
}

void kvnode_handle(AtomContext& ctx, const AtomName& self, const std::string& prefix,
                   const RingView& view, KvRequest req) {
  if (view.points.empty()) {
    send_response(ctx, req.reply_to, req.correlation, KvError{"no ring"});
    return;
  }
  auto resp_r = responsible_set(view, req.key());
  if (!resp_r.ok()) {
    send_response(ctx, req.reply_to, req.correlation, KvError{resp_r.error().message});
    return;
  }
  const auto& resp = resp_r.value();
  auto self_it = std::find(resp.begin(), resp.end(), self);

  if (self_it == resp.end()) {
    // Stale routing: walk the ring until a responsible member is reached.
    if (req.hops + 1u > view.points.size()) {
      send_response(ctx, req.reply_to, req.correlation, KvError{"routing loop"});
      return;
    }
    ++req.hops;
    auto next = ring_successor(view, self);
    const AtomName& target = next.ok() ? next.value() : resp[0];
    if (!ctx.send(DestExact{target}, Ordering::Fifo, encode_kv(req)).ok())
      send_response(ctx, req.reply_to, req.correlation, KvError{"next hop unreachable"});
    return;
  }

  if (auto* put = std::get_if<KvPut>(&req.op)) {
    if (auto w = ctx.storage_set(prefix + put->key, put->value); !w.ok()) {
      send_response(ctx, req.reply_to, req.correlation, KvError{w.error().message});
      return;
    }
    ++req.written;
    if (req.written >= resp.size()) {
      // Last replica in the chain acknowledges, so an Ok means every
      // responsible member has the key.
      send_response(ctx, req.reply_to, req.correlation, KvOk{std::nullopt});
      return;
    }
    std::size_t pos = static_cast<std::size_t>(self_it - resp.begin());
    const AtomName& next = resp[(pos + 1) % resp.size()];
    if (!ctx.send(DestExact{next}, Ordering::Fifo, encode_kv(req)).ok())
      send_response(ctx, req.reply_to, req.correlation, KvError{"replica unreachable"});
    return;
  }

  auto got = ctx.storage_get(prefix + req.key());
  if (!got.ok()) {
    send_response(ctx, req.reply_to, req.correlation, KvError{got.error().message});
    return;
  }
  if (got.value())
    send_response(ctx, req.reply_to, req.correlation, KvOk{**got});
  else
    send_response(ctx, req.reply_to, req.correlation, KvNotFound{});
}

}  // namespace

GuestTask kvnode_main(AtomContext& ctx, std::optional<Event>) {
  const AtomName self = ctx.self_name();
  const std::string prefix = self.str() + "/";
  const AtomName coord = coordinator_name();
  RingView view;
  std::deque<KvRequest> early;  // requests that arrive before the first view

  // Register with the topology owner; keep trying until it answers.
  while (view.version == 0) {
    (void)ctx.send(DestExact{coord}, Ordering::Fifo, encode_kv(KvJoin{self}));
    auto env = co_await ctx.receive(500ms);
    if (!env.ok()) {
      if (env.error().code == Errc::stopped) co_return;
      continue;  // coordinator not up yet; join again
    }
    auto msg = decode_kv(env.value().payload);
    if (!msg) continue;
    if (const auto* nv = std::get_if<RingView>(&*msg)) {
      if (nv->version > view.version) view = *nv;
    } else if (const auto* req = std::get_if<KvRequest>(&*msg)) {
      if (early.size() < 1024) early.push_back(*req);
    }
  }
  for (auto& req : early) kvnode_handle(ctx, self, prefix, view, std::move(req));
  early.clear();

  for (;;) {
    auto env = co_await ctx.receive();
    if (!env.ok()) co_return;
    auto msg = decode_kv(env.value().payload);
    if (!msg) continue;
    if (const auto* nv = std::get_if<RingView>(&*msg)) {
      if (nv->version > view.version) {
        view = *nv;
        kvnode_rebalance(ctx, self, prefix, view);
      }
    } else if (auto* req = std::get_if<KvRequest>(&*msg)) {
      kvnode_handle(ctx, self, prefix, view, std::move(*req));
    }
    // KvResponse acks from rebalance writes and stray traffic are dropped.
  }
}

GuestTask kvfrontend_main(AtomContext& ctx, std::optional<Event> initial) {
  const AtomName coord = coordinator_name();
  RingView view;
  bool have_view = false;
  std::deque<Event> backlog;  // events popped while waiting on other traffic
  if (initial) backlog.push_back(std::move(*initial));

  for (;;) {
    if (backlog.empty()) {
      auto env = co_await ctx.receive();
      if (!env.ok()) co_return;
      if (auto ev = as_event(env.value())) backlog.push_back(std::move(*ev));
      continue;
    }
    Event ev = std::move(backlog.front());
    backlog.pop_front();

    // Refresh the topology when this instance has none yet.
    if (!have_view) {
      (void)ctx.send(DestExact{coord}, Ordering::Fifo, encode_kv(KvTopology{}));
      auto deadline = std::chrono::steady_clock::now() + 1s;
      while (!have_view && std::chrono::steady_clock::now() < deadline) {
        auto env = co_await ctx.receive(1000ms);
        if (!env.ok()) {
          if (env.error().code == Errc::stopped) co_return;
          break;
        }
        if (auto nested = as_event(env.value())) {
          backlog.push_back(std::move(*nested));
          continue;
        }
        auto msg = decode_kv(env.value().payload);
        if (msg && std::holds_alternative<RingView>(*msg)) {
          view = std::get<RingView>(std::move(*msg));
          have_view = true;
        }
      }
      if (!have_view) {
        (void)ctx.respond(ev.correlation, 503, "topology unavailable");
        ctx.event_complete();
        continue;
      }
    }

    // Path shape is /kv/<key>; the route prefix guarantees the head.
    std::string key;
    if (ev.path.rfind("/kv/", 0) == 0) key = ev.path.substr(4);
    if (key.empty()) {
      (void)ctx.respond(ev.correlation, 400, "missing key");
      ctx.event_complete();
      continue;
    }

    std::variant<KvPut, KvGet> op;
    if (ev.method == "PUT")
      op = KvPut{key, ev.body};
    else if (ev.method == "GET")
      op = KvGet{key};
    else {
      (void)ctx.respond(ev.correlation, 405, "unsupported method");
      ctx.event_complete();
      continue;
    }

    int status = 500;
    std::string body = "kv timeout";
    for (int attempt = 0; attempt < 2; ++attempt) {
      KvRequest req;
      req.op = op;
      req.reply_to = ctx.self_name();
      req.correlation = fresh_correlation(ctx);

      auto resp = responsible_set(view, key);
      if (!resp.ok()) {
        status = 500;
        body = resp.error().message;
        break;
      }
      if (!ctx.send(DestExact{resp.value()[0]}, Ordering::Fifo, encode_kv(req)).ok()) {
        status = 500;
        body = "kv node unreachable";
        break;
      }

      bool got_reply = false;
      bool retry = false;
      auto wait_deadline = std::chrono::steady_clock::now() + 2s;
      while (std::chrono::steady_clock::now() < wait_deadline) {
        auto env = co_await ctx.receive(2000ms);
        if (!env.ok()) {
          if (env.error().code == Errc::stopped) co_return;
          break;
        }
        if (auto nested = as_event(env.value())) {
          backlog.push_back(std::move(*nested));
          continue;
        }
        auto msg = decode_kv(env.value().payload);
        if (!msg) continue;
        const auto* kres = std::get_if<KvResponse>(&*msg);
        if (!kres || !(kres->correlation == req.correlation)) continue;
        got_reply = true;
        if (const auto* okv = std::get_if<KvOk>(&kres->outcome)) {
          status = 200;
          body = okv->value ? *okv->value : std::string{};
        } else if (std::holds_alternative<KvNotFound>(kres->outcome)) {
          status = 404;
          body = "not found";
        } else {
          // Routing errors usually mean this instance's view is stale:
          // refresh once and retry once.
          status = 500;
          body = std::get<KvError>(kres->outcome).text;
          retry = attempt == 0;
        }
        break;
      }
      if (!got_reply) {
        status = 500;
        body = "kv timeout";
        break;
      }
      if (!retry) break;

      (void)ctx.send(DestExact{coord}, Ordering::Fifo, encode_kv(KvTopology{}));
      auto env = co_await ctx.receive(1000ms);
      if (env.ok()) {
        if (auto nested = as_event(env.value())) {
          backlog.push_back(std::move(*nested));
        } else if (auto msg = decode_kv(env.value().payload);
                   msg && std::holds_alternative<RingView>(*msg)) {
          view = std::get<RingView>(std::move(*msg));
        }
      } else if (env.error().code == Errc::stopped) {
        co_return;
      }
    }

    (void)ctx.respond(ev.correlation, status, std::move(body));
    ctx.event_complete();
  }
}

GuestTask echo_main(AtomContext& ctx, std::optional<Event> initial) {
  std::optional<Event> ev = std::move(initial);
  for (;;) {
    if (ev) {
      (void)ctx.respond(ev->correlation, 200, std::move(ev->body));
      ctx.event_complete();
      ev.reset();
    }
    auto env = co_await ctx.receive();
    if (!env.ok()) co_return;
    ev = as_event(env.value());
  }
}

Result<void> register_kv_definitions(Engine& engine) {
  if (auto r = engine.register_definition("coordinator", coordinator_main); !r.ok()) return r;
  if (auto r = engine.register_definition("kvnode", kvnode_main); !r.ok()) return r;
  if (auto r = engine.register_definition("kvfrontend", kvfrontend_main); !r.ok()) return r;
  return engine.register_definition("echo", echo_main);
}

}  // namespace radon
