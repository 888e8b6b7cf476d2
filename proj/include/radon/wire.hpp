#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "radon/message.hpp"
#include "radon/registry.hpp"
#include "radon/result.hpp"

namespace radon::wire {

constexpr uint32_t kProtocolVersion = 1;

// A frame on the wire is: u32 big-endian body length, u8 kind, kind-specific
// body. The length counts the kind byte plus the body. Strings are length
// prefixed (u16 for names and short fields, u32 for payloads).
constexpr std::size_t kMaxFrameBytes = (4u << 20) + 1024;  // payload cap + header slack
constexpr std::size_t kLengthPrefixBytes = 4;

enum class FrameKind : uint8_t {
  Hello = 1,
  RegisterDelta = 2,
  DeregisterDelta = 3,
  Envelope = 4,
  SpawnRequest = 5,
  SpawnReply = 6,
  Ping = 7,
};

// First frame in each direction on a fresh connection. A node that cannot
// accept the peer (version mismatch, duplicate node id) answers with
// status != 0 and a reason, then closes.
struct Hello {
  uint32_t protocol_version = kProtocolVersion;
  std::string node_id;
  std::vector<std::string> tags;
  uint8_t status = 0;  // 0 = ok, nonzero = refused
  std::string reason;  // empty unless refused

  friend bool operator==(const Hello&, const Hello&) = default;
};

// Asks the receiving node to instantiate one configuration. The document is
// a single rendered configuration; daemons still carry their name template,
// expanded against the receiver's own node id.
struct SpawnRequest {
  uint64_t request_id = 0;
  std::string config_doc;

  friend bool operator==(const SpawnRequest&, const SpawnRequest&) = default;
};

struct SpawnReply {
  uint64_t request_id = 0;
  bool ok = false;
  std::string config_name;  // definition or expanded daemon name, for reports
  std::string error;        // empty when ok

  friend bool operator==(const SpawnReply&, const SpawnReply&) = default;
};

struct Ping {
  friend bool operator==(const Ping&, const Ping&) = default;
};

// Registry deltas ride the two delta frame kinds; a record-type byte inside
// the body separates name records from alias memberships, so RegistryDelta's
// four kinds map onto two frame kinds losslessly.
using Frame = std::variant<Hello, RegistryDelta, Envelope, SpawnRequest, SpawnReply, Ping>;

FrameKind frame_kind(const Frame& f);

// Full wire bytes including the length prefix. Errors with too_large when
// the encoded frame would exceed kMaxFrameBytes.
Result<std::string> encode_frame(const Frame& f);

// Decodes one frame body (kind byte + body, the length prefix already
// stripped). Truncated, trailing, oversized, or malformed input is a
// protocol_error.
Result<Frame> decode_frame(std::string_view bytes);

// Reads the body length out of a 4-byte prefix; protocol_error when it
// exceeds kMaxFrameBytes or is zero (every frame has at least a kind byte).
Result<uint32_t> decode_length_prefix(const uint8_t prefix[4]);

}  // namespace radon::wire
