#pragma once

#include <atomic>
#include <cassert>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include <boost/context/fiber.hpp>

namespace fj {

using TaskId = std::uint64_t;
inline constexpr TaskId no_task = 0;

enum class Priority : std::uint8_t { High, Normal, Low };

enum class TaskState : std::uint8_t { Pending, Running, Suspended, Finished };

struct WorkerId {
  std::size_t index = 0;

  friend constexpr auto operator<=>(WorkerId, WorkerId) = default;
};

/// Per-task storage slot for layers built on top of the scheduler.
class TaskLocal {
 public:
  virtual ~TaskLocal() = default;
};

class Runtime;
class TaskList;

namespace detail {

struct WakeState;
struct TaskAccess;

enum class SwitchReason : std::uint8_t { None, Finished, Yield, Suspend };

inline TaskId next_task_id() noexcept {
  static std::atomic<TaskId> next{1};
  return next.fetch_add(1, std::memory_order_relaxed);
}

// Pending -> Running, Running -> {Pending (yield), Suspended, Finished},
// Suspended -> Pending (resumed, waiting for a worker). Finished is terminal.
constexpr bool valid_transition(TaskState from, TaskState to) noexcept {
  switch (from) {
    case TaskState::Pending: return to == TaskState::Running;
    case TaskState::Running:
      return to == TaskState::Pending || to == TaskState::Suspended || to == TaskState::Finished;
    case TaskState::Suspended: return to == TaskState::Pending || to == TaskState::Running;
    case TaskState::Finished: return false;
  }
  return false;
}

}  // namespace detail

/// A schedulable unit of work. Owned by the runtime from submission until it
/// finishes; policies only ever see raw pointers.
class Task {
 public:
  using Body = std::function<void()>;

  Task(Priority priority, Body body)
      : id_(detail::next_task_id()), priority_(priority), body_(std::move(body)) {}

  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;

  TaskId id() const noexcept { return id_; }
  Priority priority() const noexcept { return priority_; }
  TaskState state() const noexcept { return state_.load(std::memory_order_acquire); }

  // Worker that created or last readied the task; used for queue locality.
  std::optional<WorkerId> origin_worker() const noexcept {
    if (origin_ < 0) return std::nullopt;
    return WorkerId{static_cast<std::size_t>(origin_)};
  }
  void set_origin_worker(std::optional<WorkerId> w) noexcept {
    origin_ = w ? static_cast<std::int64_t>(w->index) : -1;
  }

  // Worker a pinning policy bound this task to.
  std::optional<WorkerId> home_worker() const noexcept {
    if (home_ < 0) return std::nullopt;
    return WorkerId{static_cast<std::size_t>(home_)};
  }
  void set_home_worker(WorkerId w) noexcept { home_ = static_cast<std::int64_t>(w.index); }

  TaskLocal* local() const noexcept { return local_.get(); }
  void set_local(std::unique_ptr<TaskLocal> local) noexcept { local_ = std::move(local); }

  void set_state(TaskState to) noexcept {
    assert(detail::valid_transition(state(), to));
    state_.store(to, std::memory_order_release);
  }

 private:
  friend class Runtime;
  friend class TaskList;
  friend struct detail::TaskAccess;

  TaskId id_;
  Priority priority_;
  std::atomic<TaskState> state_{TaskState::Pending};
  std::int64_t origin_ = -1;
  std::int64_t home_ = -1;
  Body body_;

  Task* prev_ = nullptr;
  Task* next_ = nullptr;

  Runtime* runtime_ = nullptr;
  boost::context::fiber fiber_;
  boost::context::fiber caller_;
  detail::SwitchReason reason_ = detail::SwitchReason::None;
  std::shared_ptr<detail::WakeState> wake_;
  std::unique_ptr<TaskLocal> local_;
};

/// Intrusive doubly-linked list of tasks. Not synchronized.
class TaskList {
 public:
  bool empty() const noexcept { return head_ == nullptr; }
  std::size_t size() const noexcept { return size_; }

  void push_back(Task* t) noexcept {
    t->next_ = nullptr;
    t->prev_ = tail_;
    if (tail_) tail_->next_ = t; else head_ = t;
    tail_ = t;
    ++size_;
  }

  void push_front(Task* t) noexcept {
    t->prev_ = nullptr;
    t->next_ = head_;
    if (head_) head_->prev_ = t; else tail_ = t;
    head_ = t;
    ++size_;
  }

  Task* pop_front() noexcept {
    Task* t = head_;
    if (!t) return nullptr;
    head_ = t->next_;
    if (head_) head_->prev_ = nullptr; else tail_ = nullptr;
    t->next_ = t->prev_ = nullptr;
    --size_;
    return t;
  }

  Task* pop_back() noexcept {
    Task* t = tail_;
    if (!t) return nullptr;
    tail_ = t->prev_;
    if (tail_) tail_->next_ = nullptr; else head_ = nullptr;
    t->next_ = t->prev_ = nullptr;
    --size_;
    return t;
  }

 private:
  Task* head_ = nullptr;
  Task* tail_ = nullptr;
  std::size_t size_ = 0;
};

}  // namespace fj
