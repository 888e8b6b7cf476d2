#include "radon/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <json.hpp>

namespace radon {
namespace {

using nlohmann::json;

constexpr std::chrono::milliseconds kHandshakeTimeout{5000};
constexpr std::chrono::milliseconds kDialTimeout{2000};
// Per-connection backlog cap; envelope frames beyond it are dropped (the
// sender counts the drop), control frames always queue.
constexpr std::size_t kMaxQueuedBytes = 64u << 20;

// Deploy connections announce themselves with this id; a leading underscore
// marks a non-mesh client, which never hosts atoms or joins the resync.
constexpr const char* kDeployId = "_deploy";

void set_recv_timeout(int fd, std::chrono::milliseconds ms) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(ms.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>(ms.count() % 1000 * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

bool read_exact(int fd, char* dst, std::size_t n) {
  while (n > 0) {
    ssize_t r = ::recv(fd, dst, n, 0);
    if (r <= 0) {
      if (r < 0 && errno == EINTR) continue;
      return false;
    }
    dst += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

Result<wire::Frame> read_frame_fd(int fd) {
  uint8_t prefix[4];
  if (!read_exact(fd, reinterpret_cast<char*>(prefix), 4))
    return make_error(Errc::unavailable, "connection closed");
  auto len = wire::decode_length_prefix(prefix);
  if (!len) return len.error();
  std::string body(*len, '\0');
  if (!read_exact(fd, body.data(), body.size()))
    return make_error(Errc::unavailable, "connection closed");
  return wire::decode_frame(body);
}

bool write_frame_fd(int fd, const wire::Frame& f) {
  auto enc = wire::encode_frame(f);
  return enc && write_all(fd, *enc);
}

int dial(const std::string& host, uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return -1;
  int fd = -1;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, p->ai_addr, p->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pf{fd, POLLOUT, 0};
      rc = ::poll(&pf, 1, static_cast<int>(timeout.count())) == 1 ? 0 : -1;
      if (rc == 0) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      break;
    }
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd >= 0) set_nodelay(fd);
  return fd;
}

}  // namespace

Result<ClusterDoc> parse_cluster(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("nodes") ||
      !doc["nodes"].is_array())
    return make_error(Errc::syntax_error, "cluster document: object with a nodes array");
  ClusterDoc out;
  std::set<std::string> seen;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_object() || !n.contains("id") || !n["id"].is_string() || !n.contains("addr") ||
        !n["addr"].is_string())
      return make_error(Errc::syntax_error, "node entry needs string id and addr");
    NodeSpec spec;
    spec.id = n["id"].get<std::string>();
    if (spec.id.empty() || spec.id[0] == '_')
      return make_error(Errc::semantic_error, "node id must be non-empty and not start with _");
    if (!seen.insert(spec.id).second)
      return make_error(Errc::semantic_error, "duplicate node id '" + spec.id + "'");
    std::string addr = n["addr"].get<std::string>();
    auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
      return make_error(Errc::semantic_error, "addr must be host:port, got '" + addr + "'");
    spec.host = addr.substr(0, colon);
    int port = 0;
    for (char c : addr.substr(colon + 1)) {
      if (c < '0' || c > '9' || port > 65535)
        return make_error(Errc::semantic_error, "bad port in '" + addr + "'");
      port = port * 10 + (c - '0');
    }
    if (port == 0 || port > 65535)
      return make_error(Errc::semantic_error, "bad port in '" + addr + "'");
    spec.port = static_cast<uint16_t>(port);
    if (n.contains("tags")) {
      if (!n["tags"].is_array())
        return make_error(Errc::syntax_error, "tags must be an array");
      for (const auto& t : n["tags"]) {
        if (!t.is_string()) return make_error(Errc::syntax_error, "tags must be strings");
        spec.tags.insert(t.get<std::string>());
      }
    }
    out.nodes.push_back(std::move(spec));
  }
  return out;
}

std::string render_cluster(const ClusterDoc& doc) {
  json nodes = json::array();
  for (const auto& n : doc.nodes) {
    json entry{{"id", n.id}, {"addr", n.host + ":" + std::to_string(n.port)}};
    if (!n.tags.empty()) entry["tags"] = n.tags;
    nodes.push_back(std::move(entry));
  }
  return json{{"nodes", std::move(nodes)}}.dump(2) + "\n";
}

const NodeSpec* find_node(const ClusterDoc& doc, const std::string& id) {
  for (const auto& n : doc.nodes)
    if (n.id == id) return &n;
  return nullptr;
}

Transport::Transport(Registry& registry, Router& router, Options opts)
    : registry_(registry), router_(router), opts_(std::move(opts)), log_(opts_.logger) {
  static Logger null_logger([](std::string_view) {});
  if (log_ == nullptr) log_ = &null_logger;
}

Transport::~Transport() { stop(); }

Result<void> Transport::start() {
  if (running_.load()) return make_error(Errc::invalid_argument, "transport already started");

  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return make_error(Errc::io_error, "socket: " + std::string(strerror(errno)));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(opts_.listen_port);
  if (::inet_pton(AF_INET, opts_.listen_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return make_error(Errc::invalid_argument, "listen host must be an IPv4 address");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd, 128) != 0) {
    auto err = make_error(Errc::io_error, "bind " + opts_.listen_host + ":" +
                                              std::to_string(opts_.listen_port) + ": " +
                                              strerror(errno));
    ::close(fd);
    return err;
  }
  sockaddr_in bound{};
  socklen_t blen = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &blen);
  bound_port_ = ntohs(bound.sin_port);
  listen_fd_ = fd;

  running_.store(true);
  registry_.set_broadcast([this](const RegistryDelta& d) { broadcast_delta(d); });
  router_.set_remote_forward(
      [this](const std::string& node, Envelope env) { return forward_envelope(node, std::move(env)); });

  acceptor_ = std::thread(&Transport::accept_main, this);
  for (const auto& peer : opts_.peers) {
    // One connection per pair: dial only ids after our own; they accept.
    if (peer.id > opts_.node_id) dialers_.emplace_back(&Transport::dial_main, this, peer);
  }
  log_->info("transport node=" + opts_.node_id + " listening on " + opts_.listen_host + ":" +
             std::to_string(bound_port_));
  return {};
}

void Transport::stop() {
  if (!running_.exchange(false)) return;
  registry_.set_broadcast(nullptr);
  router_.set_remote_forward(nullptr);

  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  {
    std::lock_guard lk(stop_mu_);
    stop_cv_.notify_all();
  }
  auto close_all = [this] {
    std::vector<std::shared_ptr<Conn>> snapshot;
    {
      std::lock_guard lk(mu_);
      snapshot = conns_;
    }
    for (auto& c : snapshot) close_conn(c);
  };
  close_all();
  if (acceptor_.joinable()) acceptor_.join();
  for (auto& d : dialers_) d.join();
  dialers_.clear();
  close_all();  // conns created while the creators were winding down

  std::vector<std::shared_ptr<Conn>> all;
  {
    std::lock_guard lk(mu_);
    all.swap(conns_);
    peers_.clear();
  }
  // Readers first: an inbound reader spawns its conn's writer, so a joined
  // reader means the writer member is settled.
  for (auto& c : all)
    if (c->reader.joinable()) c->reader.join();
  for (auto& c : all) {
    if (c->writer.joinable()) c->writer.join();
    if (c->fd >= 0) ::close(c->fd);
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void Transport::set_spawn_handler(SpawnHandler fn) {
  std::lock_guard lk(spawn_mu_);
  spawn_ = std::move(fn);
}

Result<void> Transport::forward_envelope(const std::string& node, Envelope env) {
  std::shared_ptr<Conn> conn;
  {
    std::lock_guard lk(mu_);
    auto it = peers_.find(node);
    if (it != peers_.end() && !it->second->closed.load()) conn = it->second;
  }
  if (!conn) {
    stats_.forward_drops.fetch_add(1);
    return make_error(Errc::unavailable, "no connection to node '" + node + "'");
  }
  auto enc = wire::encode_frame(wire::Frame{std::move(env)});
  if (!enc) return enc.error();
  if (!enqueue(conn, std::move(*enc), true)) {
    stats_.forward_drops.fetch_add(1);
    return make_error(Errc::unavailable, "link to '" + node + "' saturated or closed");
  }
  return {};
}

bool Transport::peer_connected(const std::string& node) const {
  std::lock_guard lk(mu_);
  auto it = peers_.find(node);
  return it != peers_.end() && !it->second->closed.load();
}

std::size_t Transport::connected_peer_count() const {
  std::lock_guard lk(mu_);
  std::size_t n = 0;
  for (const auto& [id, conn] : peers_)
    if (!conn->closed.load()) ++n;
  return n;
}

void Transport::accept_main() {
  while (running_.load()) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_.load()) break;
      if (errno == EINTR) continue;
      break;
    }
    set_nodelay(fd);
    set_recv_timeout(fd, kHandshakeTimeout);
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;
    // Threads before publication: once a conn is in conns_, a racing reaper
    // may collect it, and a reader assigned after that is never joined.
    conn->reader = std::thread(&Transport::reader_main, this, conn);
    {
      std::lock_guard lk(mu_);
      conns_.push_back(conn);
    }
    reap_dead_conns();
  }
}

void Transport::dial_main(NodeSpec peer) {
  while (running_.load()) {
    int fd = dial(peer.host, peer.port, kDialTimeout);
    if (fd < 0) {
      std::unique_lock lk(stop_mu_);
      stop_cv_.wait_for(lk, opts_.reconnect_interval, [this] { return !running_.load(); });
      continue;
    }
    set_recv_timeout(fd, kHandshakeTimeout);
    wire::Hello hello;
    hello.node_id = opts_.node_id;
    hello.tags.assign(opts_.tags.begin(), opts_.tags.end());
    bool ok = write_frame_fd(fd, wire::Frame{hello});
    std::string refusal;
    if (ok) {
      auto reply = read_frame_fd(fd);
      if (!reply || !std::holds_alternative<wire::Hello>(*reply)) {
        ok = false;
      } else {
        const auto& h = std::get<wire::Hello>(*reply);
        if (h.status != 0) {
          ok = false;
          refusal = h.reason;
        }
      }
    }
    if (!ok) {
      ::close(fd);
      if (!refusal.empty())
        log_->info("transport node=" + opts_.node_id + " refused by " + peer.id + ": " + refusal);
      std::unique_lock lk(stop_mu_);
      stop_cv_.wait_for(lk, opts_.reconnect_interval, [this] { return !running_.load(); });
      continue;
    }
    set_recv_timeout(fd, std::chrono::milliseconds(0));

    auto conn = std::make_shared<Conn>();
    conn->fd = fd;
    conn->peer_id = peer.id;
    // Threads before publication, as in accept_main.
    adopt_peer(conn);
    conn->reader = std::thread(&Transport::reader_main, this, conn);
    {
      std::lock_guard lk(mu_);
      conns_.push_back(conn);
    }
    log_->info("transport node=" + opts_.node_id + " connected to " + peer.id);

    // The writer owns wcv; watch for the conn's death on the stop clock so
    // a queue notify is never consumed by this loop.
    while (running_.load() && !conn->closed.load()) {
      std::unique_lock lk(stop_mu_);
      stop_cv_.wait_for(lk, std::chrono::milliseconds(100), [this] { return !running_.load(); });
    }
    reap_dead_conns();
    std::unique_lock lk(stop_mu_);
    stop_cv_.wait_for(lk, opts_.reconnect_interval, [this] { return !running_.load(); });
  }
}

bool Transport::handshake_inbound(const std::shared_ptr<Conn>& conn) {
  auto first = read_frame_fd(conn->fd);
  if (!first || !std::holds_alternative<wire::Hello>(*first)) return false;
  const auto& h = std::get<wire::Hello>(*first);

  auto refuse = [&](const std::string& reason) {
    stats_.hellos_refused.fetch_add(1);
    wire::Hello r;
    r.node_id = opts_.node_id;
    r.status = 1;
    r.reason = reason;
    write_frame_fd(conn->fd, wire::Frame{r});
    log_->info("transport node=" + opts_.node_id + " refused hello from '" + h.node_id +
               "': " + reason);
    return false;
  };

  if (h.protocol_version != wire::kProtocolVersion)
    return refuse("protocol version mismatch: got " + std::to_string(h.protocol_version) +
                  ", want " + std::to_string(wire::kProtocolVersion));
  if (h.node_id.empty()) return refuse("empty node id");

  bool ephemeral = h.node_id[0] == '_';
  if (!ephemeral) {
    if (h.node_id == opts_.node_id) return refuse("self connection");
    bool known = false;
    for (const auto& p : opts_.peers) known = known || p.id == h.node_id;
    if (!known) return refuse("unknown peer '" + h.node_id + "'");
    // Mesh direction is fixed: the lexically smaller id dials the larger.
    if (h.node_id > opts_.node_id) return refuse("dial direction: " + h.node_id + " must accept");
    std::lock_guard lk(mu_);
    auto it = peers_.find(h.node_id);
    if (it != peers_.end() && !it->second->closed.load()) return refuse("duplicate node id");
  }

  wire::Hello okReply;
  okReply.node_id = opts_.node_id;
  okReply.tags.assign(opts_.tags.begin(), opts_.tags.end());
  if (!write_frame_fd(conn->fd, wire::Frame{okReply})) return false;

  set_recv_timeout(conn->fd, std::chrono::milliseconds(0));
  conn->peer_id = h.node_id;
  conn->ephemeral = ephemeral;
  if (ephemeral) {
    conn->writer = std::thread(&Transport::writer_main, this, conn);
  } else {
    adopt_peer(conn);
    log_->info("transport node=" + opts_.node_id + " accepted " + h.node_id);
  }
  return true;
}

void Transport::adopt_peer(const std::shared_ptr<Conn>& conn) {
  {
    std::lock_guard lk(mu_);
    peers_[conn->peer_id] = conn;
  }
  conn->writer = std::thread(&Transport::writer_main, this, conn);
  resync_peer(conn);
  stats_.connects.fetch_add(1);
}

void Transport::resync_peer(const std::shared_ptr<Conn>& conn) {
  // The peer is broadcast-visible before the snapshot is taken, so a racing
  // local mutation is at worst sent twice; applying a delta twice is
  // harmless, missing one is not.
  registry_.purge_node(conn->peer_id);
  for (const auto& d : registry_.snapshot_for_peer()) {
    auto enc = wire::encode_frame(wire::Frame{d});
    if (enc) enqueue(conn, std::move(*enc), false);
  }
}

void Transport::reader_main(std::shared_ptr<Conn> conn) {
  if (conn->peer_id.empty() && !handshake_inbound(conn)) {
    close_conn(conn);
    return;
  }
  while (!conn->closed.load()) {
    auto frame = read_frame_fd(conn->fd);
    if (!frame) break;
    stats_.frames_received.fetch_add(1);
    if (auto* d = std::get_if<RegistryDelta>(&*frame)) {
      registry_.apply_remote(*d);
    } else if (auto* env = std::get_if<Envelope>(&*frame)) {
      router_.deliver_local(std::move(*env));
    } else if (auto* req = std::get_if<wire::SpawnRequest>(&*frame)) {
      SpawnHandler handler;
      {
        std::lock_guard lk(spawn_mu_);
        handler = spawn_;
      }
      wire::SpawnReply reply;
      if (handler) {
        reply = handler(*req);
      } else {
        reply.ok = false;
        reply.error = "node does not accept spawn requests";
      }
      reply.request_id = req->request_id;
      auto enc = wire::encode_frame(wire::Frame{reply});
      if (enc) enqueue(conn, std::move(*enc), false);
    } else if (std::holds_alternative<wire::Ping>(*frame)) {
      // Keepalive, nothing to do.
    } else {
      log_->info("transport node=" + opts_.node_id + " unexpected frame from '" +
                 conn->peer_id + "'");
      break;
    }
  }
  close_conn(conn);
}

void Transport::writer_main(std::shared_ptr<Conn> conn) {
  for (;;) {
    std::string next;
    {
      std::unique_lock lk(conn->wmu);
      conn->wcv.wait(lk, [&conn] { return conn->closed.load() || !conn->outq.empty(); });
      if (conn->closed.load()) return;
      next = std::move(conn->outq.front());
      conn->outq.pop_front();
      conn->outq_bytes -= next.size();
    }
    if (!write_all(conn->fd, next)) {
      close_conn(conn);
      return;
    }
    stats_.frames_sent.fetch_add(1);
  }
}

bool Transport::enqueue(const std::shared_ptr<Conn>& conn, std::string bytes, bool droppable) {
  std::lock_guard lk(conn->wmu);
  if (conn->closed.load()) return false;
  if (droppable && conn->outq_bytes + bytes.size() > kMaxQueuedBytes) return false;
  conn->outq_bytes += bytes.size();
  conn->outq.push_back(std::move(bytes));
  conn->wcv.notify_one();
  return true;
}

void Transport::broadcast_delta(const RegistryDelta& d) {
  auto enc = wire::encode_frame(wire::Frame{d});
  if (!enc) return;
  std::lock_guard lk(mu_);
  for (const auto& [id, conn] : peers_)
    if (!conn->closed.load()) enqueue(conn, *enc, false);
}

void Transport::close_conn(const std::shared_ptr<Conn>& conn) {
  if (conn->closed.exchange(true)) return;
  ::shutdown(conn->fd, SHUT_RDWR);
  {
    std::lock_guard lk(mu_);
    auto it = peers_.find(conn->peer_id);
    if (it != peers_.end() && it->second == conn) peers_.erase(it);
  }
  {
    std::lock_guard lk(conn->wmu);
    conn->wcv.notify_all();
  }
  if (!conn->peer_id.empty() && !conn->ephemeral)
    log_->info("transport node=" + opts_.node_id + " link to " + conn->peer_id + " closed");
}

void Transport::reap_dead_conns() {
  // Runs only on the acceptor and dialer threads, never on a conn's own
  // reader or writer. A conn in conns_ has its reader member settled; the
  // writer is settled too or assigned by the reader, which is joined first.
  std::vector<std::shared_ptr<Conn>> dead;
  {
    std::lock_guard lk(mu_);
    auto it = conns_.begin();
    while (it != conns_.end()) {
      if ((*it)->closed.load()) {
        dead.push_back(*it);
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : dead) {
    if (c->reader.joinable()) {
      if (c->reader.get_id() == std::this_thread::get_id())
        c->reader.detach();  // dialer-owned conn whose reader is this thread: impossible, guard anyway
      else
        c->reader.join();
    }
    if (c->writer.joinable()) c->writer.join();
    if (c->fd >= 0) ::close(c->fd);
    c->fd = -1;
  }
}

namespace {

Result<int> deploy_dial(const NodeSpec& node, std::chrono::milliseconds timeout) {
  int fd = dial(node.host, node.port, kDialTimeout);
  if (fd < 0)
    return make_error(Errc::unavailable,
                      "cannot reach " + node.id + " at " + node.host + ":" + std::to_string(node.port));
  set_recv_timeout(fd, timeout);
  wire::Hello hello;
  hello.node_id = kDeployId;
  if (!write_frame_fd(fd, wire::Frame{hello})) {
    ::close(fd);
    return make_error(Errc::unavailable, "handshake write to " + node.id + " failed");
  }
  auto reply = read_frame_fd(fd);
  if (!reply || !std::holds_alternative<wire::Hello>(*reply)) {
    ::close(fd);
    return make_error(Errc::protocol_error, "bad handshake reply from " + node.id);
  }
  const auto& h = std::get<wire::Hello>(*reply);
  if (h.status != 0) {
    ::close(fd);
    return make_error(Errc::protocol_error, node.id + " refused deploy: " + h.reason);
  }
  return fd;
}

}  // namespace

Result<DeployReport> deploy(const ClusterDoc& cluster,
                            const std::vector<AtomConfiguration>& configs,
                            std::chrono::milliseconds timeout) {
  if (cluster.nodes.empty()) return make_error(Errc::invalid_argument, "empty cluster");
  if (configs.empty()) return make_error(Errc::invalid_argument, "nothing to deploy");

  DeployReport report;
  std::map<std::string, int> conns;
  uint64_t next_id = 1;

  for (const auto& cfg : configs) {
    std::string cname = cfg.kind == AtomKind::Daemon ? cfg.name : cfg.definition;
    std::vector<const NodeSpec*> eligible;
    for (const auto& node : cluster.nodes)
      if (host_eligible(cfg.hosts, node.id, node.tags)) eligible.push_back(&node);
    if (eligible.empty()) {
      report.placements.push_back({cname, "", false, "no eligible node"});
      continue;
    }
    for (const NodeSpec* node : eligible) {
      Placement p;
      p.config_name = cname;
      p.node = node->id;
      int fd = -1;
      if (auto it = conns.find(node->id); it != conns.end()) {
        fd = it->second;
      } else {
        auto dialed = deploy_dial(*node, timeout);
        if (!dialed) {
          p.error = dialed.error().message;
          report.placements.push_back(std::move(p));
          continue;
        }
        fd = *dialed;
        conns[node->id] = fd;
      }
      wire::SpawnRequest req;
      req.request_id = next_id++;
      req.config_doc = render_one_configuration(cfg);
      bool sent = write_frame_fd(fd, wire::Frame{req});
      std::optional<wire::SpawnReply> reply;
      if (sent) {
        auto frame = read_frame_fd(fd);
        if (frame && std::holds_alternative<wire::SpawnReply>(*frame)) {
          auto got = std::get<wire::SpawnReply>(std::move(*frame));
          if (got.request_id == req.request_id) reply = std::move(got);
        }
      }
      if (!reply) {
        ::close(fd);
        conns.erase(node->id);
        p.error = "connection to " + node->id + " lost during deploy";
      } else {
        p.ok = reply->ok;
        p.error = reply->error;
        if (reply->ok && !reply->config_name.empty()) p.config_name = reply->config_name;
      }
      report.placements.push_back(std::move(p));
    }
  }
  for (auto& [id, fd] : conns) ::close(fd);
  return report;
}

}  // namespace radon
