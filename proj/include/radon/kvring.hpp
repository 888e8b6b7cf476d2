#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "radon/names.hpp"
#include "radon/result.hpp"

namespace radon {

struct RingPoint {
  uint64_t hash = 0;
  AtomName member;
  friend bool operator==(const RingPoint&, const RingPoint&) = default;
};

// Consistent-hashing ring: one point per member, sorted by hash. `version`
// increases on every accepted topology change so holders can detect stale
// views. `replication` is the configured factor; the effective factor is
// capped at the member count while the ring is still filling.
struct RingView {
  std::vector<RingPoint> points;
  uint64_t version = 0;
  uint32_t replication = 1;

  bool contains(const AtomName& member) const;
  friend bool operator==(const RingView&, const RingView&) = default;
};

// FNV-1a 64-bit. Fixed constants (offset basis 0xcbf29ce484222325, prime
// 0x100000001b3) keep placements identical across nodes, runs, and builds.
uint64_t ring_hash(std::string_view bytes);

// Members responsible for a key hash: the primary owns the smallest point
// hash >= h (wrapping past the highest point to the lowest), replicas are
// the next distinct members clockwise, min(replication, members) in total.
Result<std::vector<AtomName>> responsible_for_hash(const RingView& ring, uint64_t h);
Result<std::vector<AtomName>> responsible_set(const RingView& ring, std::string_view key);

// Clockwise neighbor of a member already on the ring.
Result<AtomName> ring_successor(const RingView& ring, const AtomName& member);

}  // namespace radon
