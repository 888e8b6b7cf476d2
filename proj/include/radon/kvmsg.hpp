#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "radon/kvring.hpp"
#include "radon/message.hpp"
#include "radon/names.hpp"

namespace radon {

// Application payload schema for the replicated KV store. Compact binary,
// big-endian lengths, one kind byte per message; stable within a protocol
// version. Decoding is strict: truncation, trailing bytes, or an unknown
// kind yield nullopt.

struct KvPut {
  std::string key;
  std::string value;
  friend bool operator==(const KvPut&, const KvPut&) = default;
};
struct KvGet {
  std::string key;
  friend bool operator==(const KvGet&, const KvGet&) = default;
};

struct KvRequest {
  std::variant<KvPut, KvGet> op;
  AtomName reply_to;
  CorrelationId correlation;
  uint16_t hops = 0;     // forwarding steps taken; capped at ring size
  uint16_t written = 0;  // replicas written so far in this put chain
  friend bool operator==(const KvRequest&, const KvRequest&) = default;

  const std::string& key() const {
    return std::holds_alternative<KvPut>(op) ? std::get<KvPut>(op).key : std::get<KvGet>(op).key;
  }
};

struct KvOk {
  std::optional<std::string> value;  // present for gets, absent for put acks
  friend bool operator==(const KvOk&, const KvOk&) = default;
};
struct KvNotFound {
  friend bool operator==(const KvNotFound&, const KvNotFound&) = default;
};
struct KvError {
  std::string text;
  friend bool operator==(const KvError&, const KvError&) = default;
};

struct KvResponse {
  CorrelationId correlation;
  std::variant<KvOk, KvNotFound, KvError> outcome;
  friend bool operator==(const KvResponse&, const KvResponse&) = default;
};

// Ring membership registration; the reply (a RingView) goes to the
// envelope's sender.
struct KvJoin {
  AtomName member;
  friend bool operator==(const KvJoin&, const KvJoin&) = default;
};

// Topology query; the reply (a RingView) goes to the envelope's sender.
struct KvTopology {
  friend bool operator==(const KvTopology&, const KvTopology&) = default;
};

using KvMessage = std::variant<KvRequest, KvResponse, KvJoin, KvTopology, RingView>;

std::string encode_kv(const KvMessage& msg);
std::optional<KvMessage> decode_kv(std::string_view payload);

}  // namespace radon
