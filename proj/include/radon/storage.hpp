#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "radon/result.hpp"

namespace radon {

constexpr std::size_t kMaxStoreKeyBytes = 1u << 10;    // 1 KiB
constexpr std::size_t kMaxStoreValueBytes = 4u << 20;  // 4 MiB

enum class Durability {
  Sync,   // fdatasync before every set returns
  Async,  // background flush every 50 ms
};

/// Per-node persistent key-value store: an append log replayed into an
/// in-memory table, with compaction once dead bytes dominate. Torn tail
/// records (crash mid-append) are detected by CRC and dropped on open.
class Store {
 public:
  static Result<std::unique_ptr<Store>> open(const std::filesystem::path& dir,
                                             Durability durability);
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  Result<void> set(const std::string& key, const std::string& value);
  Result<std::optional<std::string>> get(const std::string& key) const;
  /// Removes the key; a tombstone record makes the removal durable. No-op
  /// when the key is absent.
  Result<void> erase(const std::string& key);
  /// Keys beginning with `prefix`, sorted. Serves the KV app's local
  /// rebalancing scan; not an ordered range-query contract.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Forces pending appends to disk (meaningful in Async mode).
  void flush();

  /// Offline/diagnostic iteration in key order; used by `store dump`.
  void for_each(const std::function<void(const std::string&, const std::string&)>& fn) const;

  std::size_t entry_count() const;

 private:
  Store(std::filesystem::path dir, Durability durability);
  Result<void> replay();
  Result<void> append_locked(const std::string& key, const std::string& value,
                             bool tombstone = false);
  void compact_locked();
  void flusher_main();

  std::filesystem::path dir_;
  std::filesystem::path log_path_;
  Durability durability_;
  int fd_ = -1;

  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> table_;
  uint64_t log_bytes_ = 0;
  uint64_t live_bytes_ = 0;

  std::atomic<bool> dirty_{false};
  std::atomic<bool> stopping_{false};
  std::condition_variable flush_cv_;
  std::mutex flush_mu_;
  std::thread flusher_;
};

}  // namespace radon
