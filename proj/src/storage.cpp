#include "radon/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <map>
#include <memory>
#include <vector>

namespace radon {

namespace {

// Record layout: u32 body_len | u32 crc32(body) | body = u16 klen | key |
// u32 vlen | value. All integers little-endian. vlen == kTombstoneLen marks
// a deletion record carrying no value bytes; real values are capped far
// below it, so old logs can never contain the sentinel by accident.
constexpr std::size_t kRecordHeader = 8;
constexpr uint64_t kCompactMinBytes = 8u << 20;
constexpr uint32_t kTombstoneLen = 0xFFFFFFFFu;

uint32_t crc32_of(const char* data, std::size_t n) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i)
    c = table[(c ^ static_cast<unsigned char>(data[i])) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void put_u16le(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 24));
}

uint32_t read_u32le(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return uint32_t(u[0]) | (uint32_t(u[1]) << 8) | (uint32_t(u[2]) << 16) | (uint32_t(u[3]) << 24);
}

uint16_t read_u16le(const char* p) {
  const auto* u = reinterpret_cast<const unsigned char*>(p);
  return static_cast<uint16_t>(uint16_t(u[0]) | (uint16_t(u[1]) << 8));
}

std::string encode_record(const std::string& key, const std::string& value,
                          bool tombstone = false) {
  std::string body;
  body.reserve(6 + key.size() + value.size());
  put_u16le(body, static_cast<uint16_t>(key.size()));
  body += key;
  put_u32le(body, tombstone ? kTombstoneLen : static_cast<uint32_t>(value.size()));
  body += value;

  std::string rec;
  rec.reserve(kRecordHeader + body.size());
  put_u32le(rec, static_cast<uint32_t>(body.size()));
  put_u32le(rec, crc32_of(body.data(), body.size()));
  rec += body;
  return rec;
}

bool write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

}  // namespace

Store::Store(std::filesystem::path dir, Durability durability)
    : dir_(std::move(dir)), log_path_(dir_ / "store.log"), durability_(durability) {}

Result<std::unique_ptr<Store>> Store::open(const std::filesystem::path& dir,
                                           Durability durability) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return make_error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());

  auto store = std::unique_ptr<Store>(new Store(dir, durability));
  if (auto r = store->replay(); !r) return r.error();

  store->fd_ = ::open(store->log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (store->fd_ < 0)
    return make_error(Errc::io_error,
                      "cannot open " + store->log_path_.string() + ": " + std::strerror(errno));

  if (durability == Durability::Async)
    store->flusher_ = std::thread([s = store.get()] { s->flusher_main(); });
  return store;
}

Store::~Store() {
  stopping_.store(true);
  flush_cv_.notify_all();
  if (flusher_.joinable()) flusher_.join();
  if (fd_ >= 0) {
    ::fdatasync(fd_);
    ::close(fd_);
  }
}

Result<void> Store::replay() {
  table_.clear();
  log_bytes_ = 0;
  live_bytes_ = 0;

  int fd = ::open(log_path_.c_str(), O_RDONLY);
  if (fd < 0) {
    if (errno == ENOENT) return {};
    return make_error(Errc::io_error, "cannot read " + log_path_.string());
  }

  std::string data;
  {
    char buf[1 << 16];
    ssize_t n;
    while ((n = ::read(fd, buf, sizeof(buf))) > 0) data.append(buf, static_cast<std::size_t>(n));
    ::close(fd);
    if (n < 0) return make_error(Errc::io_error, "read failed on " + log_path_.string());
  }

  std::size_t off = 0;
  std::size_t good_end = 0;
  while (off + kRecordHeader <= data.size()) {
    uint32_t body_len = read_u32le(data.data() + off);
    uint32_t crc = read_u32le(data.data() + off + 4);
    if (off + kRecordHeader + body_len > data.size()) break;  // torn tail
    const char* body = data.data() + off + kRecordHeader;
    if (crc32_of(body, body_len) != crc) break;
    if (body_len < 6) break;
    uint16_t klen = read_u16le(body);
    if (2u + klen + 4u > body_len) break;
    uint32_t vlen = read_u32le(body + 2 + klen);
    if (vlen == kTombstoneLen) {
      if (2u + klen + 4u != body_len) break;
      std::string key(body + 2, klen);
      auto it = table_.find(key);
      if (it != table_.end()) {
        live_bytes_ -= kRecordHeader + 6 + key.size() + it->second.size();
        table_.erase(it);
      }
    } else {
      if (2u + klen + 4u + vlen != body_len) break;
      std::string key(body + 2, klen);
      std::string value(body + 2 + klen + 4, vlen);
      auto it = table_.find(key);
      if (it != table_.end()) live_bytes_ -= kRecordHeader + 6 + key.size() + it->second.size();
      live_bytes_ += kRecordHeader + 6 + key.size() + value.size();
      table_[std::move(key)] = std::move(value);
    }
    off += kRecordHeader + body_len;
    good_end = off;
  }
  log_bytes_ = good_end;

  // Drop any torn tail so future appends start at a clean boundary.
  if (good_end < data.size()) {
    std::error_code ec;
    std::filesystem::resize_file(log_path_, good_end, ec);
    if (ec) return make_error(Errc::io_error, "cannot truncate torn tail: " + ec.message());
  }
  return {};
}

Result<void> Store::set(const std::string& key, const std::string& value) {
  if (key.size() > kMaxStoreKeyBytes)
    return make_error(Errc::too_large, "key exceeds " + std::to_string(kMaxStoreKeyBytes) + " bytes");
  if (value.size() > kMaxStoreValueBytes)
    return make_error(Errc::too_large,
                      "value exceeds " + std::to_string(kMaxStoreValueBytes) + " bytes");

  std::lock_guard lk(mu_);
  if (auto r = append_locked(key, value); !r) return r;

  auto it = table_.find(key);
  if (it != table_.end()) live_bytes_ -= kRecordHeader + 6 + key.size() + it->second.size();
  live_bytes_ += kRecordHeader + 6 + key.size() + value.size();
  table_[key] = value;

  if (log_bytes_ > kCompactMinBytes && log_bytes_ > 2 * live_bytes_) compact_locked();
  return {};
}

Result<void> Store::append_locked(const std::string& key, const std::string& value,
                                  bool tombstone) {
  std::string rec = encode_record(key, value, tombstone);
  if (!write_all(fd_, rec.data(), rec.size()))
    return make_error(Errc::io_error, "append failed: " + std::string(std::strerror(errno)));
  log_bytes_ += rec.size();
  if (durability_ == Durability::Sync) {
    if (::fdatasync(fd_) != 0)
      return make_error(Errc::io_error, "fdatasync failed: " + std::string(std::strerror(errno)));
  } else {
    dirty_.store(true, std::memory_order_relaxed);
  }
  return {};
}

Result<std::optional<std::string>> Store::get(const std::string& key) const {
  std::lock_guard lk(mu_);
  auto it = table_.find(key);
  if (it == table_.end()) return std::optional<std::string>{};
  return std::optional<std::string>{it->second};
}

Result<void> Store::erase(const std::string& key) {
  std::lock_guard lk(mu_);
  auto it = table_.find(key);
  if (it == table_.end()) return {};
  if (auto r = append_locked(key, "", true); !r) return r;
  live_bytes_ -= kRecordHeader + 6 + key.size() + it->second.size();
  table_.erase(it);
  if (log_bytes_ > kCompactMinBytes && log_bytes_ > 2 * live_bytes_) compact_locked();
  return {};
}

std::vector<std::string> Store::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  {
    std::lock_guard lk(mu_);
    for (const auto& [k, v] : table_) {
      (void)v;
      if (k.compare(0, prefix.size(), prefix) == 0) out.push_back(k);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void Store::flush() {
  std::lock_guard lk(mu_);
  if (fd_ >= 0) ::fdatasync(fd_);
  dirty_.store(false, std::memory_order_relaxed);
}

void Store::for_each(
    const std::function<void(const std::string&, const std::string&)>& fn) const {
  std::map<std::string, std::string> ordered;
  {
    std::lock_guard lk(mu_);
    ordered.insert(table_.begin(), table_.end());
  }
  for (const auto& [k, v] : ordered) fn(k, v);
}

std::size_t Store::entry_count() const {
  std::lock_guard lk(mu_);
  return table_.size();
}

void Store::compact_locked() {
  auto tmp = dir_ / "store.log.tmp";
  int tfd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (tfd < 0) return;  // keep appending to the old log

  uint64_t bytes = 0;
  bool ok = true;
  for (const auto& [k, v] : table_) {
    std::string rec = encode_record(k, v);
    if (!write_all(tfd, rec.data(), rec.size())) {
      ok = false;
      break;
    }
    bytes += rec.size();
  }
  if (ok) ok = ::fdatasync(tfd) == 0;
  ::close(tfd);
  if (!ok) {
    ::unlink(tmp.c_str());
    return;
  }

  std::error_code ec;
  std::filesystem::rename(tmp, log_path_, ec);
  if (ec) {
    ::unlink(tmp.c_str());
    return;
  }
  ::close(fd_);
  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND, 0644);
  log_bytes_ = bytes;
  live_bytes_ = bytes;
}

void Store::flusher_main() {
  using namespace std::chrono_literals;
  std::unique_lock lk(flush_mu_);
  while (!stopping_.load()) {
    flush_cv_.wait_for(lk, 50ms);
    if (dirty_.exchange(false, std::memory_order_relaxed)) {
      std::lock_guard g(mu_);
      if (fd_ >= 0) ::fdatasync(fd_);
    }
  }
}

}  // namespace radon
