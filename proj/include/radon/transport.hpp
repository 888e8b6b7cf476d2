#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "radon/config.hpp"
#include "radon/logging.hpp"
#include "radon/registry.hpp"
#include "radon/result.hpp"
#include "radon/router.hpp"
#include "radon/wire.hpp"

namespace radon {

// Static cluster membership document. Nodes are separate processes; the
// mesh is a full graph over this list.
struct NodeSpec {
  std::string id;
  std::string host;
  uint16_t port = 0;
  std::set<std::string> tags;

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct ClusterDoc {
  std::vector<NodeSpec> nodes;  // unique ids

  friend bool operator==(const ClusterDoc&, const ClusterDoc&) = default;
};

Result<ClusterDoc> parse_cluster(const std::string& text);
std::string render_cluster(const ClusterDoc& doc);
const NodeSpec* find_node(const ClusterDoc& doc, const std::string& id);

struct TransportStats {
  std::atomic<uint64_t> frames_sent{0};
  std::atomic<uint64_t> frames_received{0};
  std::atomic<uint64_t> forward_drops{0};
  std::atomic<uint64_t> hellos_refused{0};
  std::atomic<uint64_t> connects{0};
};

// TCP mesh endpoint for one node. Exactly one connection per node pair:
// each node dials the peers whose id orders after its own and accepts the
// rest. Frames on one connection form a single ordered stream; per-pair
// FIFO comes from that plus the sender-side write queue.
//
// On every (re)established mesh connection both sides purge the peer's
// registry records and send their own snapshot, so views reconverge no
// matter what was missed while apart.
class Transport {
 public:
  struct Options {
    std::string node_id;
    std::string listen_host = "127.0.0.1";
    uint16_t listen_port = 0;  // 0: kernel-assigned, see listen_port()
    std::set<std::string> tags;
    std::vector<NodeSpec> peers;  // full cluster; own entry ignored
    Logger* logger = nullptr;
    std::chrono::milliseconds reconnect_interval{200};
  };

  // Serves SpawnRequest frames from deploy connections.
  using SpawnHandler = std::function<wire::SpawnReply(const wire::SpawnRequest&)>;

  Transport(Registry& registry, Router& router, Options opts);
  ~Transport();

  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  // Binds the listener, wires itself as the registry broadcast sink and the
  // router's remote forward port, then starts the mesh threads.
  Result<void> start();
  void stop();

  void set_spawn_handler(SpawnHandler fn);

  // Router egress for remote destinations. An unconnected peer or a full
  // write queue is an error; the caller counts the drop.
  Result<void> forward_envelope(const std::string& node, Envelope env);

  bool peer_connected(const std::string& node) const;
  std::size_t connected_peer_count() const;
  uint16_t listen_port() const { return bound_port_; }
  TransportStats& stats() { return stats_; }

 private:
  struct Conn {
    int fd = -1;
    std::string peer_id;
    bool ephemeral = false;  // deploy connection, not a mesh member
    std::atomic<bool> closed{false};
    std::mutex wmu;
    std::condition_variable wcv;
    std::deque<std::string> outq;
    std::size_t outq_bytes = 0;
    std::thread reader;
    std::thread writer;
  };

  void accept_main();
  void dial_main(NodeSpec peer);
  void reader_main(std::shared_ptr<Conn> conn);
  void writer_main(std::shared_ptr<Conn> conn);

  // Server side of the hello exchange; returns false when the connection
  // was refused or is broken.
  bool handshake_inbound(const std::shared_ptr<Conn>& conn);
  void adopt_peer(const std::shared_ptr<Conn>& conn);
  void resync_peer(const std::shared_ptr<Conn>& conn);

  bool enqueue(const std::shared_ptr<Conn>& conn, std::string bytes, bool droppable);
  void broadcast_delta(const RegistryDelta& d);
  void close_conn(const std::shared_ptr<Conn>& conn);
  void reap_dead_conns();

  Registry& registry_;
  Router& router_;
  Options opts_;
  Logger* log_;
  TransportStats stats_;

  std::atomic<bool> running_{false};
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  int listen_fd_ = -1;
  uint16_t bound_port_ = 0;
  std::thread acceptor_;
  std::vector<std::thread> dialers_;

  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::map<std::string, std::shared_ptr<Conn>> peers_;  // handshaken mesh conns
  SpawnHandler spawn_;
  std::mutex spawn_mu_;
};

// Placement outcome for one (configuration, node) pair.
struct Placement {
  std::string config_name;  // definition, or daemon name template
  std::string node;
  bool ok = false;
  std::string error;
};

struct DeployReport {
  std::vector<Placement> placements;
  bool all_ok() const {
    for (const auto& p : placements)
      if (!p.ok) return false;
    return !placements.empty();
  }
};

// Pushes configurations to every eligible node over ephemeral connections.
// A configuration with no eligible node yields a failed placement; other
// configurations still deploy. Re-deploying reports name conflicts.
Result<DeployReport> deploy(const ClusterDoc& cluster,
                            const std::vector<AtomConfiguration>& configs,
                            std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace radon
