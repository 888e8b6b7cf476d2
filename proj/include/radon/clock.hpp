#pragma once

#include <chrono>
#include <mutex>

namespace radon {

using MonoTime = std::chrono::steady_clock::time_point;
using MonoDuration = std::chrono::steady_clock::duration;

/// Monotonic time source used for scheduling decisions (instance expiry,
/// receive timeouts). Injectable so policy behavior is testable without
/// real sleeps.
class ClockSource {
 public:
  virtual ~ClockSource() = default;
  virtual MonoTime now() = 0;
};

class SteadyClock final : public ClockSource {
 public:
  MonoTime now() override { return std::chrono::steady_clock::now(); }
};

/// Test clock advanced by hand.
class ManualClock final : public ClockSource {
 public:
  explicit ManualClock(MonoTime start = MonoTime{}) : t_(start) {}

  MonoTime now() override {
    std::lock_guard lk(mu_);
    return t_;
  }
  void advance(MonoDuration d) {
    std::lock_guard lk(mu_);
    t_ += d;
  }
  void set(MonoTime t) {
    std::lock_guard lk(mu_);
    t_ = t;
  }

 private:
  std::mutex mu_;
  MonoTime t_;
};

}  // namespace radon
