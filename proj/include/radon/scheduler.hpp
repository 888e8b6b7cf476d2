#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "radon/clock.hpp"
#include "radon/config.hpp"

namespace radon {

struct Assignment {
  uint64_t instance = 0;  // 1-based, monotonically assigned per definition
  bool fresh = false;     // caller must create the instance before delivery
};

// Policy state machine for one reactive definition. Externally synchronized;
// the caller drives it with arrivals, completions, ticks, and deaths, and
// performs every retirement handed back through `retired`.
//
// Semantics:
// - One: a single instance, created on the first event; later events queue.
// - RoundRobin(k): up to k instances created as the first events arrive, then
//   a cursor cycles over the live list.
// - OnDemand: a fresh instance per event, retired at completion.
// - OnDemandExpire: reuse the least-recently-active idle instance (lowest id
//   on ties); retire once idle_timeout elapses since last activity or once
//   events_handled reaches max_events.
class ReactiveScheduler {
 public:
  explicit ReactiveScheduler(SchedulingPolicy policy);

  Assignment on_event(MonoTime now, std::vector<uint64_t>& retired);
  void on_complete(uint64_t instance, MonoTime now, std::vector<uint64_t>& retired);
  void on_tick(MonoTime now, std::vector<uint64_t>& retired);

  // Instance vanished outside scheduler control (guest exit or fault).
  void on_gone(uint64_t instance);

  std::size_t live_count() const { return slots_.size(); }
  // Earliest idle-expiry instant among live instances, if the policy has one.
  std::optional<MonoTime> next_deadline() const;

 private:
  struct Slot {
    uint64_t id = 0;
    bool busy = false;
    uint64_t events_handled = 0;
    MonoTime last_activity{};
  };

  bool queueing_policy() const;  // One / RoundRobin: events queue per instance
  void purge_expired(MonoTime now, std::vector<uint64_t>& retired);
  Slot* find(uint64_t instance);
  void erase(uint64_t instance);

  SchedulingPolicy policy_;
  std::vector<Slot> slots_;  // creation order
  std::size_t cursor_ = 0;
  uint64_t next_id_ = 1;
};

}  // namespace radon
