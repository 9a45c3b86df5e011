#pragma once

#include <atomic>
#include <cassert>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <thread>
#include <vector>

#include <boost/context/fiber.hpp>

#include "fj/config.hpp"
#include "fj/detail/stack_pool.hpp"
#include "fj/error.hpp"
#include "fj/policies.hpp"
#include "fj/task.hpp"
#include "fj/tool.hpp"

namespace fj {

class Runtime;

namespace detail {

struct TaskAccess;

struct WakeState {
  enum Phase : int { kArmed = 0, kParked = 1, kWoken = 2 };

  Task* task = nullptr;  // null for a waiter that is a plain OS thread
  std::atomic<int> phase{kArmed};
  std::atomic<bool> consumed{false};
  std::binary_semaphore thread_signal{0};
};

struct Worker {
  Runtime* runtime = nullptr;
  WorkerId id;
  std::thread thread;
};

struct ThreadState {
  Worker* worker = nullptr;
  Task* task = nullptr;
};

// A task may continue on a different OS thread after a switch, so every read
// of scheduler thread-locals goes through an opaque call; the compiler must
// not reuse a TLS address computed before the switch.
[[gnu::noinline]] inline ThreadState* thread_state() noexcept {
  thread_local ThreadState state;
  ThreadState* p = &state;
  asm volatile("" : "+r"(p) : : "memory");
  return p;
}

}  // namespace detail

/// Handle that resumes one suspension of one task. Copies share state; the
/// first resume() wins and any further resume() throws Errc::double_resume.
class WakeToken {
 public:
  WakeToken() = default;

  bool valid() const noexcept { return static_cast<bool>(state_); }
  void resume();

 private:
  friend class WaitList;
  friend void suspend_current_impl(const std::function<void(WakeToken)>&);

  explicit WakeToken(std::shared_ptr<detail::WakeState> state) : state_(std::move(state)) {}

  std::shared_ptr<detail::WakeState> state_;
};

inline void resume(WakeToken& token) { token.resume(); }

namespace this_task {

inline Task* current() noexcept { return detail::thread_state()->task; }
inline bool inside() noexcept { return current() != nullptr; }
inline TaskId id() noexcept {
  Task* t = current();
  return t ? t->id() : no_task;
}
inline std::optional<WorkerId> worker() noexcept {
  detail::Worker* w = detail::thread_state()->worker;
  if (!w) return std::nullopt;
  return w->id;
}
inline TaskLocal* local() noexcept {
  Task* t = current();
  return t ? t->local() : nullptr;
}

/// Gives the worker to other ready work; the task continues later.
/// Outside a task this does nothing (and asserts in debug builds).
void yield_now() noexcept;

/// Parks the calling task without blocking its worker. `publish` receives
/// the token that will wake it; it runs before the switch and may hand the
/// token to another thread that resumes it immediately.
void suspend_current(const std::function<void(WakeToken)>& publish);

}  // namespace this_task

inline void yield_now() noexcept { this_task::yield_now(); }

/// FIFO of parked waiters, guarded by the caller's mutex. Tasks suspend;
/// plain threads block on a semaphore.
class WaitList {
 public:
  /// Releases `lock` while waiting and reacquires it before returning.
  void park(std::unique_lock<std::mutex>& lock);

  bool notify_one() {
    if (waiters_.empty()) return false;
    WakeToken token = std::move(waiters_.front());
    waiters_.pop_front();
    token.resume();
    return true;
  }

  std::size_t notify_all() {
    std::deque<WakeToken> woken;
    woken.swap(waiters_);
    for (auto& token : woken) token.resume();
    return woken.size();
  }

  bool empty() const noexcept { return waiters_.empty(); }
  std::size_t size() const noexcept { return waiters_.size(); }

 private:
  std::deque<WakeToken> waiters_;
};

struct RuntimeStats {
  std::uint64_t created = 0;
  std::uint64_t finished = 0;
  std::uint64_t live = 0;
  PolicyStats queues;
};

/// A pool of workers running cooperative, stackful tasks under one policy.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config = RuntimeConfig::from_env()) : config_(config) {
    config_.validate();
    policy_ = make_policy(config_.policy, config_.num_workers);
    workers_.reserve(config_.num_workers);
    for (std::size_t i = 0; i < config_.num_workers; ++i) {
      auto worker = std::make_unique<detail::Worker>();
      worker->runtime = this;
      worker->id = WorkerId{i};
      workers_.push_back(std::move(worker));
    }
    for (auto& worker : workers_) {
      worker->thread = std::thread([this, w = worker.get()] { worker_main(*w); });
    }
  }

  ~Runtime() { shutdown(); }

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const RuntimeConfig& config() const noexcept { return config_; }
  std::size_t num_workers() const noexcept { return config_.num_workers; }
  SchedulingPolicy& policy() noexcept { return *policy_; }

  /// True until shutdown() starts.
  bool running() const noexcept { return phase_.load(std::memory_order_acquire) == Phase::Running; }

  /// Worker running the calling thread, if it belongs to this runtime.
  bool owns_current_thread() const noexcept {
    detail::Worker* w = detail::thread_state()->worker;
    return w && w->runtime == this;
  }

  TaskId spawn(Task::Body body, Priority priority = Priority::Normal,
               std::optional<WorkerId> hint = std::nullopt) {
    Task* task = create_task(std::move(body), priority);
    TaskId id = task->id();
    submit(task, hint);
    return id;
  }

  /// Allocates a task without queueing it; it must later go to submit().
  /// Fires task_create.
  Task* create_task(Task::Body body, Priority priority = Priority::Normal, std::size_t deps_count = 0) {
    check_accepting();
    auto* task = new Task(priority, std::move(body));
    task->runtime_ = this;
    live_.fetch_add(1, std::memory_order_relaxed);
    created_.fetch_add(1, std::memory_order_relaxed);
    detail::tool::task_create(this_task::id(), task->id(), deps_count);
    return task;
  }

  void submit(Task* task, std::optional<WorkerId> hint = std::nullopt) {
    assert(task->runtime_ == this);
    if (detail::Worker* w = detail::thread_state()->worker; w && w->runtime == this) {
      task->set_origin_worker(w->id);
    }
    policy_->enqueue(task, hint);
    notify_workers();
  }

  /// Runs `fn` as a task and waits for it, rethrowing what it threw.
  void run(std::function<void()> fn) {
    std::exception_ptr error;
    std::mutex mutex;
    bool done = false;
    WaitList waiters;
    spawn([&] {
      try {
        fn();
      } catch (...) {
        error = std::current_exception();
      }
      std::lock_guard guard(mutex);
      done = true;
      waiters.notify_all();
    });
    {
      std::unique_lock lock(mutex);
      while (!done) waiters.park(lock);
    }
    if (error) std::rethrow_exception(error);
  }

  /// Blocks until no task is pending, running or suspended.
  void wait_quiescent() {
    if (owns_current_thread()) {
      throw Error(Errc::invalid_argument, "wait_quiescent called from inside the runtime");
    }
    std::unique_lock lock(quiesce_mutex_);
    quiesce_cv_.wait(lock, [&] { return live_.load(std::memory_order_acquire) == 0; });
  }

  /// Lets every outstanding task finish, then stops the workers. Spawns
  /// from outside the runtime are rejected from the moment this starts.
  void shutdown() {
    std::lock_guard lifecycle(lifecycle_mutex_);
    if (phase_.load() == Phase::Stopped) return;
    if (owns_current_thread()) {
      throw Error(Errc::invalid_argument, "shutdown called from inside the runtime");
    }
    phase_.store(Phase::Draining, std::memory_order_release);
    wait_quiescent();
    stop_.store(true, std::memory_order_release);
    {
      std::lock_guard guard(park_mutex_);
      park_cv_.notify_all();
    }
    for (auto& worker : workers_) {
      if (worker->thread.joinable()) worker->thread.join();
    }
    phase_.store(Phase::Stopped, std::memory_order_release);
  }

  RuntimeStats stats() const noexcept {
    return {created_.load(std::memory_order_relaxed), finished_.load(std::memory_order_relaxed),
            live_.load(std::memory_order_relaxed), policy_->stats()};
  }

 private:
  friend struct detail::TaskAccess;

  enum class Phase { Running, Draining, Stopped };

  void check_accepting() const {
    Phase phase = phase_.load(std::memory_order_acquire);
    if (phase == Phase::Running) return;
    // Tasks still draining may keep spawning; nobody else may.
    if (phase == Phase::Draining && owns_current_thread()) return;
    throw Error(Errc::shutdown, "runtime is shut down; spawn rejected");
  }

  void notify_workers() {
    epoch_.fetch_add(1, std::memory_order_seq_cst);
    if (sleepers_.load(std::memory_order_seq_cst) > 0) {
      std::lock_guard guard(park_mutex_);
      park_cv_.notify_all();
    }
  }

  void make_ready(Task* task) {
    task->set_state(TaskState::Pending);
    if (detail::Worker* w = detail::thread_state()->worker; w && w->runtime == this) {
      task->set_origin_worker(w->id);
    }
    policy_->enqueue(task);
    notify_workers();
  }

  void worker_main(detail::Worker& worker) {
    detail::thread_state()->worker = &worker;
    detail::tool::log_worker_slot() = static_cast<std::int64_t>(worker.id.index);
    detail::tool::thread_begin(worker.id);
    while (Task* task = wait_for_work(worker)) {
      while (task) task = run_slice(worker, task);
    }
    detail::tool::thread_end(worker.id);
    detail::tool::log_worker_slot() = -1;
    detail::thread_state()->worker = nullptr;
  }

  Task* find_work(detail::Worker& worker) {
    if (Task* t = policy_->dequeue(worker.id)) return t;
    return policy_->steal(worker.id);
  }

  // Spin with yields, then sleep until an enqueue bumps the epoch. Returns
  // null only once the runtime is stopping and no work is left.
  Task* wait_for_work(detail::Worker& worker) {
    for (std::size_t spin = 0;; ++spin) {
      std::uint64_t seen = epoch_.load(std::memory_order_seq_cst);
      if (Task* t = find_work(worker)) return t;
      if (stop_.load(std::memory_order_acquire)) return nullptr;
      if (spin < config_.spin_before_park) {
        std::this_thread::yield();
        continue;
      }
      std::unique_lock lock(park_mutex_);
      sleepers_.fetch_add(1, std::memory_order_seq_cst);
      if (epoch_.load(std::memory_order_seq_cst) == seen && !stop_.load(std::memory_order_acquire)) {
        // The timeout only matters for work this worker cannot be told about
        // directly (e.g. a task pinned to it by a peer's enqueue racing sleep).
        park_cv_.wait_for(lock, std::chrono::milliseconds(10));
      }
      sleepers_.fetch_sub(1, std::memory_order_seq_cst);
      spin = 0;
    }
  }

  boost::context::fiber make_fiber(Task* task) {
    return boost::context::fiber(
        std::allocator_arg, detail::PooledStackAllocator{config_.stack_size},
        [task](boost::context::fiber&& caller) {
          task->caller_ = std::move(caller);
          try {
            task->body_();
          } catch (const std::exception& e) {
            std::fprintf(stderr, "fj: task %llu ended with exception: %s\n",
                         static_cast<unsigned long long>(task->id()), e.what());
          } catch (...) {
            std::fprintf(stderr, "fj: task %llu ended with a non-standard exception\n",
                         static_cast<unsigned long long>(task->id()));
          }
          // Captures are destroyed while the task is still current.
          task->body_ = nullptr;
          task->reason_ = detail::SwitchReason::Finished;
          return std::move(task->caller_);
        });
  }

  // Runs `task` until it finishes or switches out; returns what the worker
  // should run next (null means go look for work).
  Task* run_slice(detail::Worker& worker, Task* task) {
    task->set_state(TaskState::Running);
    detail::thread_state()->task = task;
    if (!task->fiber_) task->fiber_ = make_fiber(task);
    task->reason_ = detail::SwitchReason::None;
    task->fiber_ = std::move(task->fiber_).resume();
    detail::thread_state()->task = nullptr;

    // The successor is chosen before the switched-out task becomes visible
    // to other workers, so its schedule event is always its latest one.
    Task* next = find_work(worker);
    switch (task->reason_) {
      case detail::SwitchReason::Finished:
        detail::tool::task_schedule(task->id(), ScheduleCause::Complete, next ? next->id() : no_task);
        finish(task);
        return next;

      case detail::SwitchReason::Yield:
        detail::tool::task_schedule(task->id(), ScheduleCause::Yield, next ? next->id() : task->id());
        task->set_state(TaskState::Pending);
        if (!next) return task;
        requeue(worker, task);
        return next;

      case detail::SwitchReason::Suspend: {
        detail::tool::task_schedule(task->id(), ScheduleCause::Suspend, next ? next->id() : no_task);
        std::shared_ptr<detail::WakeState> wake = std::move(task->wake_);
        task->set_state(TaskState::Suspended);
        int expected = detail::WakeState::kArmed;
        if (wake->phase.compare_exchange_strong(expected, detail::WakeState::kParked,
                                                std::memory_order_acq_rel)) {
          return next;  // the resumer now owns the task
        }
        // Resumed before it finished parking.
        task->set_state(TaskState::Pending);
        if (!next) return task;
        requeue(worker, task);
        return next;
      }

      case detail::SwitchReason::None: break;
    }
    assert(false && "task switched out without a reason");
    return next;
  }

  void requeue(detail::Worker& worker, Task* task) {
    task->set_origin_worker(worker.id);
    policy_->enqueue(task);
    notify_workers();
  }

  void finish(Task* task) {
    task->set_state(TaskState::Finished);
    delete task;
    finished_.fetch_add(1, std::memory_order_relaxed);
    if (live_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      std::lock_guard guard(quiesce_mutex_);
      quiesce_cv_.notify_all();
    }
  }

  RuntimeConfig config_;
  std::unique_ptr<SchedulingPolicy> policy_;
  std::vector<std::unique_ptr<detail::Worker>> workers_;

  std::atomic<Phase> phase_{Phase::Running};
  std::mutex lifecycle_mutex_;
  std::atomic<bool> stop_{false};

  std::atomic<std::uint64_t> live_{0};
  std::atomic<std::uint64_t> created_{0};
  std::atomic<std::uint64_t> finished_{0};
  std::mutex quiesce_mutex_;
  std::condition_variable quiesce_cv_;

  std::atomic<std::uint64_t> epoch_{0};
  std::atomic<int> sleepers_{0};
  std::mutex park_mutex_;
  std::condition_variable park_cv_;
};

namespace detail {

// The only code outside Runtime that touches a task's switching state.
struct TaskAccess {
  static void wake(WakeState& state) {
    Task* task = state.task;
    if (state.phase.exchange(WakeState::kWoken, std::memory_order_acq_rel) == WakeState::kParked) {
      task->runtime_->make_ready(task);
    }
  }

  static void suspend(Task* task, std::shared_ptr<WakeState> state, const std::function<void(WakeToken)>& publish,
                      WakeToken token) {
    task->wake_ = std::move(state);
    try {
      publish(std::move(token));
    } catch (...) {
      task->wake_.reset();
      throw;
    }
    switch_out(task, SwitchReason::Suspend);
  }

  static void switch_out(Task* task, SwitchReason reason) {
    task->reason_ = reason;
    task->caller_ = std::move(task->caller_).resume();
  }
};

}  // namespace detail

inline void WakeToken::resume() {
  if (!state_) throw Error(Errc::invalid_token, "resume of a token no suspension issued");
  if (state_->consumed.exchange(true, std::memory_order_acq_rel)) {
    throw Error(Errc::double_resume, "token was already resumed");
  }
  if (state_->task) {
    detail::TaskAccess::wake(*state_);
  } else {
    state_->thread_signal.release();
  }
}

inline void suspend_current_impl(const std::function<void(WakeToken)>& publish) {
  Task* task = this_task::current();
  if (!task) throw Error(Errc::not_in_task, "suspend_current called outside a task");
  auto state = std::make_shared<detail::WakeState>();
  state->task = task;
  detail::TaskAccess::suspend(task, state, publish, WakeToken(state));
}

namespace this_task {

inline void yield_now() noexcept {
  Task* task = current();
  if (!task) {
    assert(false && "yield_now called outside a task");
    return;
  }
  detail::TaskAccess::switch_out(task, detail::SwitchReason::Yield);
}

inline void suspend_current(const std::function<void(WakeToken)>& publish) { suspend_current_impl(publish); }

inline void set_local(std::unique_ptr<TaskLocal> local) {
  Task* t = current();
  if (!t) throw Error(Errc::not_in_task, "set_local called outside a task");
  t->set_local(std::move(local));
}

}  // namespace this_task

inline void WaitList::park(std::unique_lock<std::mutex>& lock) {
  if (this_task::inside()) {
    this_task::suspend_current([&](WakeToken token) {
      waiters_.push_back(std::move(token));
      lock.unlock();
    });
    lock.lock();
    return;
  }
  auto state = std::make_shared<detail::WakeState>();
  waiters_.push_back(WakeToken(state));
  lock.unlock();
  state->thread_signal.acquire();
  lock.lock();
}

namespace detail {

struct GlobalRuntime {
  std::mutex mutex;
  std::unique_ptr<Runtime> current;
  std::vector<std::unique_ptr<Runtime>> retired;
  std::atomic<Runtime*> fast{nullptr};

  ~GlobalRuntime() {
    if (current) current->shutdown();
  }
};

inline GlobalRuntime& global_runtime() {
  static GlobalRuntime global;
  return global;
}

inline Runtime& start_global(GlobalRuntime& g, const RuntimeConfig& config) {
  // Shut-down instances stay alive so outstanding handles remain valid.
  if (g.current) g.retired.push_back(std::move(g.current));
  open_event_log_from_env();
  g.current = std::make_unique<Runtime>(config);
  g.fast.store(g.current.get(), std::memory_order_release);
  return *g.current;
}

}  // namespace detail

/// Process-wide runtime, started from FJ_* environment defaults on first use.
inline Runtime& runtime_ensure_started() {
  auto& g = detail::global_runtime();
  if (Runtime* rt = g.fast.load(std::memory_order_acquire); rt && rt->running()) return *rt;
  std::lock_guard guard(g.mutex);
  if (g.current && g.current->running()) return *g.current;
  return detail::start_global(g, RuntimeConfig::from_env());
}

/// As above, but a running instance must match `config` in worker count
/// and policy; otherwise Errc::config_conflict and nothing changes.
inline Runtime& runtime_ensure_started(const RuntimeConfig& config) {
  auto& g = detail::global_runtime();
  std::lock_guard guard(g.mutex);
  if (g.current && g.current->running()) {
    const RuntimeConfig& active = g.current->config();
    if (active.num_workers != config.num_workers || active.policy != config.policy) {
      throw Error(Errc::config_conflict, "runtime already started with different config");
    }
    return *g.current;
  }
  return detail::start_global(g, config);
}

/// Shuts the process-wide runtime down; a later runtime_ensure_started()
/// brings up a fresh one.
inline void runtime_shutdown() {
  auto& g = detail::global_runtime();
  std::lock_guard guard(g.mutex);
  if (g.current) g.current->shutdown();
}

/// Runtime of the calling task; otherwise the process-wide one (possibly
/// shut down), or null if none was ever started.
inline Runtime* current_runtime() noexcept {
  if (detail::Worker* w = detail::thread_state()->worker) return w->runtime;
  return detail::global_runtime().fast.load(std::memory_order_acquire);
}

/// Runtime of the calling task, else the process-wide one, started lazily.
inline Runtime& this_runtime() {
  if (detail::Worker* w = detail::thread_state()->worker) return *w->runtime;
  return runtime_ensure_started();
}

/// Spawns onto current_runtime(). Requires a started runtime.
inline TaskId spawn(Task::Body body, Priority priority = Priority::Normal) {
  Runtime* rt = current_runtime();
  if (!rt) throw Error(Errc::not_started, "spawn before any runtime was started");
  return rt->spawn(std::move(body), priority);
}

}  // namespace fj
