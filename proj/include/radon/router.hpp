#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>

#include "radon/message.hpp"
#include "radon/registry.hpp"
#include "radon/result.hpp"

namespace radon {

struct MessagingStats {
  std::atomic<uint64_t> sent{0};
  std::atomic<uint64_t> delivered{0};
  std::atomic<uint64_t> overflow_drops{0};
  std::atomic<uint64_t> stale_drops{0};
  std::atomic<uint64_t> unknown_drops{0};
  std::atomic<uint64_t> wire_drops{0};
};

// Envelope egress: resolves destinations against the registry, fans out, and
// hands each copy to the local delivery port or the remote forward port.
// Send never blocks on the receiver; a full mailbox or a dead link is a
// counted drop, not an error to the sender.
class Router {
 public:
  // Returns false when the instance rejected the envelope (mailbox full).
  using LocalDeliver = std::function<bool(Envelope)>;
  // Hands the envelope to the peer link; an error means the copy was dropped.
  using RemoteForward = std::function<Result<void>(const std::string& node, Envelope)>;

  Router(Registry& registry, std::string self_node)
      : registry_(registry), self_node_(std::move(self_node)) {}

  void set_local_deliver(LocalDeliver fn) { local_ = std::move(fn); }
  void set_remote_forward(RemoteForward fn) { remote_ = std::move(fn); }

  Result<void> send(const AtomName& from, const DestinationSelector& dest, Ordering ordering,
                    std::string payload);

  // Routes one already-resolved envelope (destination must be a live name).
  // Used for fan-out copies and for response forwarding.
  void route(Envelope env);

  // Transport ingress and engine-internal deliveries: push to the local
  // instance, counting overflow. Stale-incarnation filtering happens in the
  // delivery port, which sees the live instance.
  void deliver_local(Envelope env);

  MessagingStats& stats() { return stats_; }

 private:
  Registry& registry_;
  std::string self_node_;
  LocalDeliver local_;
  RemoteForward remote_;
  MessagingStats stats_;
};

}  // namespace radon
