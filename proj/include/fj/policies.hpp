#pragma once

#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "fj/config.hpp"
#include "fj/error.hpp"
#include "fj/task.hpp"

namespace fj {

namespace detail {

/// Mutex-guarded task deque with a lock-free emptiness probe.
class alignas(64) TaskQueue {
 public:
  void push_back(Task* t) {
    std::lock_guard guard(mutex_);
    list_.push_back(t);
    size_.store(list_.size(), std::memory_order_release);
  }

  void push_front(Task* t) {
    std::lock_guard guard(mutex_);
    list_.push_front(t);
    size_.store(list_.size(), std::memory_order_release);
  }

  Task* pop_front() {
    if (empty()) return nullptr;
    std::lock_guard guard(mutex_);
    Task* t = list_.pop_front();
    size_.store(list_.size(), std::memory_order_release);
    return t;
  }

  Task* pop_back() {
    if (empty()) return nullptr;
    std::lock_guard guard(mutex_);
    Task* t = list_.pop_back();
    size_.store(list_.size(), std::memory_order_release);
    return t;
  }

  bool empty() const noexcept { return size() == 0; }
  std::size_t size() const noexcept { return size_.load(std::memory_order_acquire); }

 private:
  std::mutex mutex_;
  TaskList list_;
  std::atomic<std::size_t> size_{0};
};

inline std::minstd_rand& thread_rng() {
  thread_local std::minstd_rand rng(
      static_cast<std::uint32_t>(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  return rng;
}

}  // namespace detail

struct PolicyStats {
  std::uint64_t enqueued = 0;
  std::uint64_t dequeued = 0;
  std::uint64_t stolen = 0;
};

/// Queue discipline plugged into the scheduler.
///
/// enqueue() and steal() may be called from any thread; dequeue(w) only by
/// worker w. A null return means no task is visible to the caller.
class SchedulingPolicy {
 public:
  explicit SchedulingPolicy(std::size_t num_workers) : num_workers_(num_workers) {
    if (num_workers_ == 0) throw Error(Errc::invalid_config, "policy needs at least one worker");
  }
  virtual ~SchedulingPolicy() = default;

  SchedulingPolicy(const SchedulingPolicy&) = delete;
  SchedulingPolicy& operator=(const SchedulingPolicy&) = delete;

  virtual PolicyKind kind() const noexcept = 0;

  /// `hint` requests a specific worker; it is taken modulo num_workers().
  void enqueue(Task* task, std::optional<WorkerId> hint = std::nullopt) {
    enqueued_.fetch_add(1, std::memory_order_relaxed);
    if (hint) hint = WorkerId{hint->index % num_workers_};
    push(task, hint);
  }

  Task* dequeue(WorkerId worker) {
    Task* t = pop(worker);
    if (t) dequeued_.fetch_add(1, std::memory_order_relaxed);
    return t;
  }

  Task* steal(WorkerId thief) {
    Task* t = steal_from_others(thief);
    if (t) stolen_.fetch_add(1, std::memory_order_relaxed);
    return t;
  }

  std::size_t num_workers() const noexcept { return num_workers_; }

  PolicyStats stats() const noexcept {
    return {enqueued_.load(std::memory_order_relaxed), dequeued_.load(std::memory_order_relaxed),
            stolen_.load(std::memory_order_relaxed)};
  }

 protected:
  virtual void push(Task* task, std::optional<WorkerId> hint) = 0;
  virtual Task* pop(WorkerId worker) = 0;
  virtual Task* steal_from_others(WorkerId) { return nullptr; }

  void note_enqueued() noexcept { enqueued_.fetch_add(1, std::memory_order_relaxed); }

  WorkerId round_robin() noexcept {
    return WorkerId{next_rr_.fetch_add(1, std::memory_order_relaxed) % num_workers_};
  }

  // hint, then the task's origin worker, then round robin.
  WorkerId placement(const Task& task, std::optional<WorkerId> hint) noexcept {
    if (hint) return *hint;
    if (auto origin = task.origin_worker(); origin && origin->index < num_workers_) return *origin;
    return round_robin();
  }

  // Visits every worker other than `self` once, starting at a random offset.
  template <class Fn>
  Task* scan_victims(WorkerId self, Fn&& try_victim) {
    if (num_workers_ < 2) return nullptr;
    std::size_t start = detail::thread_rng()() % num_workers_;
    for (std::size_t i = 0; i < num_workers_; ++i) {
      std::size_t victim = (start + i) % num_workers_;
      if (victim == self.index) continue;
      if (Task* t = try_victim(victim)) return t;
    }
    return nullptr;
  }

 private:
  std::size_t num_workers_;
  std::atomic<std::size_t> next_rr_{0};
  std::atomic<std::uint64_t> enqueued_{0};
  std::atomic<std::uint64_t> dequeued_{0};
  std::atomic<std::uint64_t> stolen_{0};
};

/// One normal FIFO per worker; thieves take from the front of other
/// workers' queues. With `with_high_tier`, High tasks go to a separate
/// per-worker queue that is always drained first.
class LocalQueuesPolicy : public SchedulingPolicy {
 public:
  LocalQueuesPolicy(std::size_t num_workers, bool with_high_tier)
      : SchedulingPolicy(num_workers),
        high_tier_(with_high_tier),
        normal_(num_workers),
        high_(with_high_tier ? num_workers : 0) {}

  PolicyKind kind() const noexcept override {
    return high_tier_ ? PolicyKind::PriorityLocal : PolicyKind::Local;
  }

  std::size_t queued_on(WorkerId w) const noexcept {
    return normal_[w.index].size() + (high_tier_ ? high_[w.index].size() : 0);
  }

 protected:
  void push(Task* task, std::optional<WorkerId> hint) override {
    WorkerId w = placement(*task, hint);
    if (high_tier_ && task->priority() == Priority::High) {
      high_[w.index].push_back(task);
    } else {
      normal_[w.index].push_back(task);
    }
  }

  Task* pop(WorkerId w) override {
    if (high_tier_) {
      if (Task* t = high_[w.index].pop_front()) return t;
    }
    return normal_[w.index].pop_front();
  }

  Task* steal_from_others(WorkerId thief) override {
    if (high_tier_) {
      if (Task* t = scan_victims(thief, [&](std::size_t v) { return high_[v].pop_front(); })) return t;
    }
    return scan_victims(thief, [&](std::size_t v) { return normal_[v].pop_front(); });
  }

 private:
  bool high_tier_;
  std::vector<detail::TaskQueue> normal_;
  std::vector<detail::TaskQueue> high_;
};

class PriorityLocalPolicy final : public LocalQueuesPolicy {
 public:
  explicit PriorityLocalPolicy(std::size_t num_workers) : LocalQueuesPolicy(num_workers, true) {}
};

class LocalPolicy final : public LocalQueuesPolicy {
 public:
  explicit LocalPolicy(std::size_t num_workers) : LocalQueuesPolicy(num_workers, false) {}
};

/// Round-robin placement onto per-worker queues; a task stays on the worker
/// it was first assigned to for its whole life. No stealing.
class StaticPriorityPolicy final : public SchedulingPolicy {
 public:
  explicit StaticPriorityPolicy(std::size_t num_workers)
      : SchedulingPolicy(num_workers), queues_(num_workers) {}

  PolicyKind kind() const noexcept override { return PolicyKind::StaticPriority; }

 protected:
  void push(Task* task, std::optional<WorkerId> hint) override {
    WorkerId w;
    if (auto home = task->home_worker()) {
      w = *home;
    } else {
      w = hint ? *hint : round_robin();
      task->set_home_worker(w);
    }
    if (task->priority() == Priority::High) {
      queues_[w.index].push_front(task);
    } else {
      queues_[w.index].push_back(task);
    }
  }

  Task* pop(WorkerId w) override { return queues_[w.index].pop_front(); }

 private:
  std::vector<detail::TaskQueue> queues_;
};

/// A single shared FIFO; High tasks jump to the front.
class GlobalPolicy final : public SchedulingPolicy {
 public:
  explicit GlobalPolicy(std::size_t num_workers) : SchedulingPolicy(num_workers) {}

  PolicyKind kind() const noexcept override { return PolicyKind::Global; }

 protected:
  void push(Task* task, std::optional<WorkerId>) override {
    if (task->priority() == Priority::High) {
      queue_.push_front(task);
    } else {
      queue_.push_back(task);
    }
  }

  Task* pop(WorkerId) override { return queue_.pop_front(); }

 private:
  detail::TaskQueue queue_;
};

/// Per-worker double-ended queues. The owner pushes and pops at the top
/// (LIFO); thieves take from the bottom (FIFO end).
class AbpStealingPolicy final : public SchedulingPolicy {
 public:
  explicit AbpStealingPolicy(std::size_t num_workers)
      : SchedulingPolicy(num_workers), deques_(num_workers) {}

  PolicyKind kind() const noexcept override { return PolicyKind::AbpStealing; }

 protected:
  void push(Task* task, std::optional<WorkerId> hint) override {
    deques_[placement(*task, hint).index].push_back(task);
  }

  Task* pop(WorkerId w) override { return deques_[w.index].pop_back(); }

  Task* steal_from_others(WorkerId thief) override {
    return scan_victims(thief, [&](std::size_t v) { return deques_[v].pop_front(); });
  }

 private:
  std::vector<detail::TaskQueue> deques_;
};

/// Complete binary tree of queues stored heap-style (root at index 1, leaf
/// for worker w at `leaf_base + w`). Unhinted tasks enter at the root; a
/// worker serves its leaf first and otherwise walks up toward the root,
/// taking one task at a time from the first non-empty node.
class HierarchicalPolicy final : public SchedulingPolicy {
 public:
  explicit HierarchicalPolicy(std::size_t num_workers)
      : SchedulingPolicy(num_workers),
        leaf_base_(std::bit_ceil(num_workers)),
        nodes_(2 * leaf_base_) {}

  PolicyKind kind() const noexcept override { return PolicyKind::Hierarchical; }

  static constexpr std::size_t root = 1;
  std::size_t node_count() const noexcept { return nodes_.size() - 1; }
  std::size_t leaf_of(WorkerId w) const noexcept { return leaf_base_ + w.index; }

  /// Places a task directly at tree node `node` in [1, node_count()].
  void enqueue_at_node(std::size_t node, Task* task) {
    if (node < root || node >= nodes_.size()) {
      throw Error(Errc::invalid_argument, "hierarchical node index out of range");
    }
    note_enqueued();
    nodes_[node].push_back(task);
  }

  std::size_t queued_at(std::size_t node) const noexcept { return nodes_[node].size(); }

 protected:
  void push(Task* task, std::optional<WorkerId> hint) override {
    if (hint) {
      nodes_[leaf_of(*hint)].push_back(task);
    } else {
      nodes_[root].push_back(task);
    }
  }

  Task* pop(WorkerId w) override {
    for (std::size_t node = leaf_of(w); node >= root; node /= 2) {
      if (Task* t = nodes_[node].pop_front()) return t;
    }
    return nullptr;
  }

  // Work parked in another subtree: other workers' leaves, then any
  // interior node off this worker's root path.
  Task* steal_from_others(WorkerId thief) override {
    if (Task* t = scan_victims(thief, [&](std::size_t v) { return nodes_[leaf_base_ + v].pop_front(); })) {
      return t;
    }
    for (std::size_t node = root + 1; node < leaf_base_; ++node) {
      if (Task* t = nodes_[node].pop_front()) return t;
    }
    return nullptr;
  }

 private:
  std::size_t leaf_base_;
  std::vector<detail::TaskQueue> nodes_;
};

/// One queue per worker, two shared high-priority queues and one shared
/// low-priority queue. Every `balance_period` dequeue attempts a worker
/// pulls work over from the longest per-worker queue.
class PeriodicPriorityPolicy final : public SchedulingPolicy {
 public:
  static constexpr std::size_t high_queue_count = 2;
  static constexpr std::uint64_t balance_period = 100;

  explicit PeriodicPriorityPolicy(std::size_t num_workers)
      : SchedulingPolicy(num_workers), local_(num_workers), attempts_(num_workers) {}

  PolicyKind kind() const noexcept override { return PolicyKind::PeriodicPriority; }

  std::size_t queued_on(WorkerId w) const noexcept { return local_[w.index].size(); }
  std::uint64_t balance_passes() const noexcept { return balance_passes_.load(std::memory_order_relaxed); }

 protected:
  void push(Task* task, std::optional<WorkerId> hint) override {
    switch (task->priority()) {
      case Priority::High:
        high_[placement(*task, hint).index % high_queue_count].push_back(task);
        break;
      case Priority::Low:
        low_.push_back(task);
        break;
      case Priority::Normal:
        local_[placement(*task, hint).index].push_back(task);
        break;
    }
  }

  Task* pop(WorkerId w) override {
    if (++attempts_[w.index].count % balance_period == 0) balance(w);
    for (std::size_t i = 0; i < high_queue_count; ++i) {
      if (Task* t = high_[(w.index + i) % high_queue_count].pop_front()) return t;
    }
    if (Task* t = local_[w.index].pop_front()) return t;
    return low_.pop_front();
  }

  Task* steal_from_others(WorkerId thief) override {
    return scan_victims(thief, [&](std::size_t v) { return local_[v].pop_front(); });
  }

 private:
  struct alignas(64) Counter {
    std::uint64_t count = 0;
  };

  void balance(WorkerId w) {
    balance_passes_.fetch_add(1, std::memory_order_relaxed);
    std::size_t busiest = w.index;
    std::size_t most = local_[w.index].size();
    for (std::size_t v = 0; v < local_.size(); ++v) {
      if (local_[v].size() > most) {
        most = local_[v].size();
        busiest = v;
      }
    }
    std::size_t mine = local_[w.index].size();
    if (busiest == w.index || most <= mine + 1) return;
    for (std::size_t moved = 0; moved < (most - mine) / 2; ++moved) {
      Task* t = local_[busiest].pop_front();
      if (!t) break;
      local_[w.index].push_back(t);
    }
  }

  std::vector<detail::TaskQueue> local_;
  detail::TaskQueue high_[high_queue_count];
  detail::TaskQueue low_;
  std::vector<Counter> attempts_;
  std::atomic<std::uint64_t> balance_passes_{0};
};

inline std::unique_ptr<SchedulingPolicy> make_policy(PolicyKind kind, std::size_t num_workers) {
  switch (kind) {
    case PolicyKind::PriorityLocal: return std::make_unique<PriorityLocalPolicy>(num_workers);
    case PolicyKind::StaticPriority: return std::make_unique<StaticPriorityPolicy>(num_workers);
    case PolicyKind::Local: return std::make_unique<LocalPolicy>(num_workers);
    case PolicyKind::Global: return std::make_unique<GlobalPolicy>(num_workers);
    case PolicyKind::AbpStealing: return std::make_unique<AbpStealingPolicy>(num_workers);
    case PolicyKind::Hierarchical: return std::make_unique<HierarchicalPolicy>(num_workers);
    case PolicyKind::PeriodicPriority: return std::make_unique<PeriodicPriorityPolicy>(num_workers);
  }
  throw Error(Errc::invalid_config, "unknown policy kind");
}

}  // namespace fj
