#include "radon/kvring.hpp"

#include <algorithm>

namespace radon {

bool RingView::contains(const AtomName& member) const {
  for (const auto& p : points)
    if (p.member == member) return true;
  return false;
}

uint64_t ring_hash(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Result<std::vector<AtomName>> responsible_for_hash(const RingView& ring, uint64_t h) {
  if (ring.points.empty()) return make_error(Errc::invalid_argument, "empty ring");
  const auto& pts = ring.points;
  auto it = std::lower_bound(pts.begin(), pts.end(), h,
                             [](const RingPoint& p, uint64_t v) { return p.hash < v; });
  std::size_t idx = it == pts.end() ? 0 : static_cast<std::size_t>(it - pts.begin());

  std::size_t want = std::min<std::size_t>(ring.replication ? ring.replication : 1, pts.size());
  std::vector<AtomName> out;
  out.reserve(want);
  for (std::size_t step = 0; step < pts.size() && out.size() < want; ++step) {
    const AtomName& m = pts[(idx + step) % pts.size()].member;
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

Result<std::vector<AtomName>> responsible_set(const RingView& ring, std::string_view key) {
  return responsible_for_hash(ring, ring_hash(key));
}

Result<AtomName> ring_successor(const RingView& ring, const AtomName& member) {
  for (std::size_t i = 0; i < ring.points.size(); ++i)
    if (ring.points[i].member == member)
      return ring.points[(i + 1) % ring.points.size()].member;
  return make_error(Errc::not_found, "member not on ring");
}

}  // namespace radon
