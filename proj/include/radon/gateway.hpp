#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "radon/engine.hpp"
#include "radon/result.hpp"
#include "radon/logging.hpp"

namespace radon {

struct GatewayStats {
  uint64_t requests = 0;
  uint64_t unmatched = 0;         // no route: 404
  uint64_t dispatch_failures = 0; // engine refused the event: 500
  uint64_t responses = 0;         // fulfilled through the responder port
  uint64_t timeouts = 0;          // waited out: 504
};

// HTTP ingress: turns each request into an Event for the longest-prefix
// matching route's definition, then parks the connection until the serving
// atom responds. Exactly one of {atom response, 404, 500, 503, 504} is
// written per request.
class Gateway {
 public:
  struct Options {
    std::string listen_host = "127.0.0.1";
    uint16_t listen_port = 0;  // 0: pick an ephemeral port
    std::chrono::milliseconds response_timeout{30000};
    Logger* logger = nullptr;
  };

  Gateway(Engine& engine, Options opts);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  Result<void> start();
  void stop();

  // Valid after a successful start().
  uint16_t listen_port() const;
  GatewayStats stats() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace radon
