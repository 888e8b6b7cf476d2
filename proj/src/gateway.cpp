#include "radon/gateway.hpp"

#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <utility>

#include "httplib.h"

namespace radon {

namespace {

constexpr const char* kContentType = "application/octet-stream";

CorrelationId fresh_correlation() {
  CorrelationId c;
  if (::getentropy(c.bytes.data(), c.bytes.size()) != 0)
    throw std::runtime_error("entropy source failed");
  return c;
}

// httplib folds connection metadata into the header multimap; those entries
// were never sent by the client, so they must not reach guest atoms.
bool is_pseudo_header(const std::string& key) {
  return key == "REMOTE_ADDR" || key == "REMOTE_PORT" || key == "LOCAL_ADDR" ||
         key == "LOCAL_PORT";
}

// One parked connection awaiting its atom's response.
struct Waiter {
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  int status = 0;
  std::string body;
};

void fulfill(const std::shared_ptr<Waiter>& w, int status, std::string body) {
  {
    std::lock_guard lk(w->mu);
    if (w->done) return;
    w->done = true;
    w->status = status;
    w->body = std::move(body);
  }
  w->cv.notify_one();
}

}  // namespace

struct Gateway::Impl {
  Engine& engine;
  Options opts;
  Logger* log;
  Logger null_logger{[](std::string_view) {}};

  httplib::Server server;
  std::thread serve_thread;
  std::atomic<bool> running{false};
  uint16_t bound_port = 0;

  std::mutex mu;  // pending map + running gate for inserts
  std::unordered_map<std::string, std::shared_ptr<Waiter>> pending;

  mutable std::mutex stats_mu;
  GatewayStats st;

  Impl(Engine& e, Options o) : engine(e), opts(std::move(o)), log(opts.logger) {
    if (!log) log = &null_logger;
  }

  void bump(uint64_t GatewayStats::* field) {
    std::lock_guard lk(stats_mu);
    ++(st.*field);
  }

  // Longest matching (method, path_prefix) wins; install order breaks ties.
  std::optional<std::string> match_route(const std::string& method, const std::string& path) {
    std::optional<std::string> best;
    std::size_t best_len = 0;
    for (const auto& [route, def] : engine.routes()) {
      if (route.method != method) continue;
      if (path.compare(0, route.path_prefix.size(), route.path_prefix) != 0) continue;
      if (!best || route.path_prefix.size() > best_len) {
        best = def;
        best_len = route.path_prefix.size();
      }
    }
    return best;
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    bump(&GatewayStats::requests);
    auto def = match_route(req.method, req.path);
    if (!def) {
      bump(&GatewayStats::unmatched);
      res.status = 404;
      res.set_content("no route", kContentType);
      return;
    }

    Event ev;
    ev.method = req.method;
    ev.path = req.path;
    ev.body = req.body;
    ev.correlation = fresh_correlation();
    for (const auto& [k, v] : req.headers)
      if (!is_pseudo_header(k)) ev.headers.emplace_back(k, v);

    const std::string key = ev.correlation.hex();
    auto w = std::make_shared<Waiter>();
    {
      std::lock_guard lk(mu);
      if (!running.load()) {
        res.status = 503;
        res.set_content("shutting down", kContentType);
        return;
      }
      pending.emplace(key, w);
    }

    if (auto r = engine.dispatch_event(*def, std::move(ev)); !r.ok()) {
      {
        std::lock_guard lk(mu);
        pending.erase(key);
      }
      bump(&GatewayStats::dispatch_failures);
      res.status = 500;
      res.set_content(r.error().message, kContentType);
      return;
    }

    {
      std::unique_lock lk(w->mu);
      w->cv.wait_for(lk, opts.response_timeout, [&] { return w->done; });
    }
    {
      std::lock_guard lk(mu);
      pending.erase(key);
    }
    // Re-check after the erase: the responder may have landed between the
    // timeout and the erase, and a real answer beats a 504.
    std::lock_guard lk(w->mu);
    if (w->done) {
      bump(&GatewayStats::responses);
      res.status = w->status;
      res.set_content(w->body, kContentType);
    } else {
      bump(&GatewayStats::timeouts);
      res.status = 504;
      res.set_content("response timeout", kContentType);
    }
  }
};

Gateway::Gateway(Engine& engine, Options opts)
    : impl_(std::make_shared<Impl>(engine, std::move(opts))) {}

Gateway::~Gateway() { stop(); }

Result<void> Gateway::start() {
  auto impl = impl_;
  if (impl->running.exchange(true)) return make_error(Errc::invalid_argument, "already started");

  impl->server.new_task_queue = [] { return new httplib::ThreadPool(32); };
  auto handler = [impl](const httplib::Request& req, httplib::Response& res) {
    impl->handle(req, res);
  };
  impl->server.Get(".*", handler);
  impl->server.Post(".*", handler);
  impl->server.Put(".*", handler);
  impl->server.Delete(".*", handler);

  if (impl->opts.listen_port == 0) {
    int port = impl->server.bind_to_any_port(impl->opts.listen_host);
    if (port <= 0) {
      impl->running = false;
      return make_error(Errc::io_error, "cannot bind " + impl->opts.listen_host);
    }
    impl->bound_port = static_cast<uint16_t>(port);
  } else {
    if (!impl->server.bind_to_port(impl->opts.listen_host, impl->opts.listen_port)) {
      impl->running = false;
      return make_error(Errc::io_error, "cannot bind " + impl->opts.listen_host + ":" +
                                            std::to_string(impl->opts.listen_port));
    }
    impl->bound_port = impl->opts.listen_port;
  }

  // The responder keeps the impl alive through any in-flight invocation the
  // engine copied out before stop() cleared the port.
  impl->engine.set_responder([impl](const CorrelationId& c, int status, std::string body) {
    std::shared_ptr<Waiter> w;
    {
      std::lock_guard lk(impl->mu);
      auto it = impl->pending.find(c.hex());
      if (it == impl->pending.end()) return false;
      w = it->second;
      impl->pending.erase(it);
    }
    fulfill(w, status, std::move(body));
    return true;
  });

  impl->serve_thread = std::thread([impl] { impl->server.listen_after_bind(); });

  for (int i = 0; i < 2000 && !impl->server.is_running(); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  if (!impl->server.is_running()) {
    stop();
    return make_error(Errc::io_error, "listener did not come up");
  }
  impl->log->info("gateway listening on " + impl->opts.listen_host + ":" +
                  std::to_string(impl->bound_port));
  return {};
}

void Gateway::stop() {
  auto impl = impl_;
  if (!impl->running.exchange(false)) return;
  impl->engine.set_responder(nullptr);
  impl->server.stop();

  // Unblock every parked handler so the worker pool can wind down promptly.
  std::vector<std::shared_ptr<Waiter>> parked;
  {
    std::lock_guard lk(impl->mu);
    for (auto& [_, w] : impl->pending) parked.push_back(w);
    impl->pending.clear();
  }
  for (auto& w : parked) fulfill(w, 503, "shutting down");

  if (impl->serve_thread.joinable()) impl->serve_thread.join();
}

uint16_t Gateway::listen_port() const { return impl_->bound_port; }

GatewayStats Gateway::stats() const {
  std::lock_guard lk(impl_->stats_mu);
  return impl_->st;
}

}  // namespace radon
