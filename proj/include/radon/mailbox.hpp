#pragma once

#include <cstddef>
#include <deque>
#include <optional>

#include "radon/message.hpp"

namespace radon {

constexpr std::size_t kDefaultMailboxCapacity = 65536;

// Two-lane envelope queue. Not internally synchronized: the owning instance
// structure guards it together with the waiting-consumer state, so the
// empty-check and the suspend decision stay atomic.
class Mailbox {
 public:
  explicit Mailbox(std::size_t capacity = kDefaultMailboxCapacity) : capacity_(capacity) {}

  // False when the mailbox is at capacity; the caller counts the drop.
  bool push(Envelope env) {
    if (fifo_.size() + unordered_.size() >= capacity_) return false;
    if (env.ordering == Ordering::Fifo)
      fifo_.push_back(std::move(env));
    else
      unordered_.push_back(std::move(env));
    return true;
  }

  // FIFO lane first, then unordered in arrival order.
  std::optional<Envelope> pop() {
    if (!fifo_.empty()) {
      Envelope e = std::move(fifo_.front());
      fifo_.pop_front();
      return e;
    }
    if (!unordered_.empty()) {
      Envelope e = std::move(unordered_.front());
      unordered_.pop_front();
      return e;
    }
    return std::nullopt;
  }

  // Empties both lanes, FIFO lane first, preserving pop order.
  std::deque<Envelope> drain() {
    std::deque<Envelope> out;
    out.swap(fifo_);
    for (auto& e : unordered_) out.push_back(std::move(e));
    unordered_.clear();
    return out;
  }

  std::size_t size() const { return fifo_.size() + unordered_.size(); }
  bool empty() const { return fifo_.empty() && unordered_.empty(); }
  void clear() {
    fifo_.clear();
    unordered_.clear();
  }

 private:
  std::deque<Envelope> fifo_;
  std::deque<Envelope> unordered_;
  std::size_t capacity_;
};

}  // namespace radon
