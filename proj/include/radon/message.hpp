#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "radon/names.hpp"

namespace radon {

constexpr std::size_t kMaxPayloadBytes = 4u << 20;  // 4 MiB

enum class Ordering : uint8_t { Unordered = 0, Fifo = 1 };

/// Opaque 128-bit correlation value.
struct CorrelationId {
  std::array<uint8_t, 16> bytes{};

  bool is_zero() const {
    for (auto b : bytes)
      if (b) return false;
    return true;
  }
  std::string hex() const;
  static std::optional<CorrelationId> from_hex(std::string_view s);

  friend bool operator==(const CorrelationId&, const CorrelationId&) = default;
};

struct DestExact {
  AtomName name;
  friend bool operator==(const DestExact&, const DestExact&) = default;
};
struct DestAliasAll {
  Alias alias;
  friend bool operator==(const DestAliasAll&, const DestAliasAll&) = default;
};
struct DestNameSet {
  std::vector<AtomName> names;
  friend bool operator==(const DestNameSet&, const DestNameSet&) = default;
};
using DestinationSelector = std::variant<DestExact, DestAliasAll, DestNameSet>;

struct Envelope {
  AtomName sender;
  AtomName destination;  // resolved single destination (fan-out happens at send)
  Ordering ordering = Ordering::Fifo;
  std::string payload;
  std::optional<CorrelationId> correlation_id;
  // Destination incarnation stamped at resolve time; receivers drop envelopes
  // whose incarnation no longer matches. 0 = unchecked (engine-internal).
  uint64_t dest_incarnation = 0;
};

/// External event delivered to a reactive atom. `correlation` identifies the
/// pending response slot; the guest completes it with respond().
struct Event {
  std::string method;
  std::string path;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  CorrelationId correlation;
};

// Reserved sender name stamped on event-envelopes (events delivered to a
// reused reactive instance through its mailbox). Atoms must not register it.
inline const char* kGatewaySender = "_gateway";

/// Event <-> envelope payload codec, used when a reused reactive instance
/// gets an event through its mailbox.
std::string encode_event_payload(const Event& ev);
std::optional<Event> decode_event_payload(const std::string& payload,
                                          const CorrelationId& corr);

/// True if the envelope carries an event for a reactive instance.
bool is_event_envelope(const Envelope& env);
/// Decodes the event out of an event-envelope; nullopt if it is not one.
std::optional<Event> as_event(const Envelope& env);

}  // namespace radon
