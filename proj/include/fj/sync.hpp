#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <set>
#include <thread>

#include "fj/error.hpp"
#include "fj/runtime.hpp"

namespace fj {

/// Mutex whose waiters suspend instead of blocking their worker.
class CoopMutex {
 public:
  bool try_lock() noexcept {
    bool expected = false;
    return locked_.compare_exchange_strong(expected, true, std::memory_order_acquire, std::memory_order_relaxed);
  }

  void lock() {
    for (int spin = 0; spin < 32; ++spin) {
      if (try_lock()) return;
      if (!this_task::inside()) std::this_thread::yield();
    }
    std::unique_lock guard(guard_);
    waiting_.fetch_add(1, std::memory_order_seq_cst);
    while (!try_lock()) waiters_.park(guard);
    waiting_.fetch_sub(1, std::memory_order_relaxed);
  }

  void unlock() {
    locked_.store(false, std::memory_order_seq_cst);
    if (waiting_.load(std::memory_order_seq_cst) > 0) {
      std::lock_guard guard(guard_);
      waiters_.notify_one();
    }
  }

  bool locked() const noexcept { return locked_.load(std::memory_order_relaxed); }

 private:
  std::atomic<bool> locked_{false};
  std::atomic<int> waiting_{0};
  std::mutex guard_;
  WaitList waiters_;
};

/// Outstanding-work counter; wait_zero() suspends until it drains.
class WaitCounter {
 public:
  void add(std::size_t n = 1) {
    std::lock_guard guard(mutex_);
    count_ += n;
  }

  // The decrement and the wakeup happen under the lock, so a waiter that
  // observes zero may destroy the counter as soon as it returns.
  void done() {
    std::lock_guard guard(mutex_);
    if (--count_ == 0) waiters_.notify_all();
  }

  void wait_zero() {
    std::unique_lock lock(mutex_);
    while (count_ != 0) waiters_.park(lock);
  }

  std::size_t pending() {
    std::lock_guard guard(mutex_);
    return count_;
  }

 private:
  std::mutex mutex_;
  std::size_t count_ = 0;
  WaitList waiters_;
};

/// Reusable barrier for a fixed number of participants.
class Barrier {
 public:
  explicit Barrier(std::size_t participants) : participants_(participants) {}

  /// Returns the generation that was completed.
  std::uint64_t arrive_and_wait() {
    std::unique_lock lock(mutex_);
    std::uint64_t gen = generation_;
    if (++arrived_ == participants_) {
      arrived_ = 0;
      ++generation_;
      waiters_.notify_all();
      return gen;
    }
    while (generation_ == gen) waiters_.park(lock);
    return gen;
  }

  std::uint64_t generation() {
    std::lock_guard guard(mutex_);
    return generation_;
  }

 private:
  std::mutex mutex_;
  std::size_t participants_;
  std::size_t arrived_ = 0;
  std::uint64_t generation_ = 0;
  WaitList waiters_;
};

/// Admits ordinals 0, 1, 2, ... one at a time, in that order.
class OrderedGate {
 public:
  void enter(std::uint64_t ordinal) {
    std::unique_lock lock(mutex_);
    if (ordinal < next_ || !entered_.insert(ordinal).second) {
      throw Error(Errc::duplicate_iteration, "ordered iteration entered twice");
    }
    while (next_ != ordinal) waiters_.park(lock);
  }

  void exit(std::uint64_t ordinal) {
    std::lock_guard guard(mutex_);
    if (ordinal != next_) throw Error(Errc::invalid_argument, "ordered exit out of turn");
    entered_.erase(ordinal);
    ++next_;
    waiters_.notify_all();
  }

  /// Skips an ordinal that has no ordered body (e.g. an iteration that
  /// never reaches the construct).
  void skip(std::uint64_t ordinal) {
    enter(ordinal);
    exit(ordinal);
  }

 private:
  std::mutex mutex_;
  std::uint64_t next_ = 0;
  std::set<std::uint64_t> entered_;
  WaitList waiters_;
};

}  // namespace fj
