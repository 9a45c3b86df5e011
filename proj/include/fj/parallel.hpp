#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fj/clock.hpp"
#include "fj/deps.hpp"
#include "fj/error.hpp"
#include "fj/loop.hpp"
#include "fj/runtime.hpp"
#include "fj/sync.hpp"
#include "fj/tool.hpp"

namespace fj {

namespace detail {

inline TeamId next_team_id() noexcept {
  static std::atomic<TeamId> next{1};
  return next.fetch_add(1, std::memory_order_relaxed);
}

// Shared state of one dynamic loop or sections construct.
struct Workshare {
  enum Kind : std::uint8_t { Loop, Sections };

  Workshare(Kind k, std::int64_t team_size, SchedKind sched, std::int64_t lower, std::int64_t upper, std::int64_t incr)
      : kind(k), cursor(team_size, sched, lower, upper, incr) {}

  Kind kind;
  DispatchCursor cursor;
  OrderedGate ordered;
  std::atomic<std::int64_t> finished{0};
};

}  // namespace detail

/// The implicit tasks executing one parallel region.
class Team {
 public:
  Team(int size, std::shared_ptr<Team> parent)
      : id_(detail::next_team_id()), size_(size), parent_(std::move(parent)), barrier_(static_cast<std::size_t>(size)) {}

  TeamId id() const noexcept { return id_; }
  int size() const noexcept { return size_; }
  const std::shared_ptr<Team>& parent() const noexcept { return parent_; }

  // False for the stand-in team of code running outside any region.
  bool is_region() const noexcept { return region_; }

 private:
  friend struct TeamAccess;

  TeamId id_;
  int size_;
  std::shared_ptr<Team> parent_;
  bool region_ = false;

  Barrier barrier_;
  WaitCounter tasks_;  // explicit tasks bound to this team
  std::atomic<std::uint64_t> single_claimed_{0};

  std::mutex workshare_mutex_;
  std::unordered_map<std::uint64_t, std::shared_ptr<detail::Workshare>> workshares_;

  std::mutex error_mutex_;
  std::exception_ptr first_error_;
};

struct TeamAccess {
  static Barrier& barrier(Team& t) noexcept { return t.barrier_; }
  static WaitCounter& tasks(Team& t) noexcept { return t.tasks_; }
  static std::atomic<std::uint64_t>& single_claimed(Team& t) noexcept { return t.single_claimed_; }
  static void mark_region(Team& t) noexcept { t.region_ = true; }

  static void record_error(Team& t, std::exception_ptr e) {
    std::lock_guard guard(t.error_mutex_);
    if (!t.first_error_) t.first_error_ = std::move(e);
  }
  static std::exception_ptr take_error(Team& t) {
    std::lock_guard guard(t.error_mutex_);
    return std::exchange(t.first_error_, nullptr);
  }

  // The construct numbered `seq` by every member maps to one shared record.
  static std::shared_ptr<detail::Workshare> workshare(Team& t, std::uint64_t seq, detail::Workshare::Kind kind,
                                                      SchedKind sched, std::int64_t lower, std::int64_t upper,
                                                      std::int64_t incr) {
    std::lock_guard guard(t.workshare_mutex_);
    auto& slot = t.workshares_[seq];
    if (!slot) {
      slot = std::make_shared<detail::Workshare>(kind, t.size_, sched, lower, upper, incr);
    } else if (slot->kind != kind || !slot->cursor.matches(sched, lower, upper, incr)) {
      throw Error(Errc::loop_mismatch, "team members disagree on worksharing construct #" + std::to_string(seq));
    }
    return slot;
  }

  static void leave_workshare(Team& t, std::uint64_t seq, detail::Workshare& ws) {
    if (ws.finished.fetch_add(1, std::memory_order_acq_rel) + 1 == t.size_) {
      std::lock_guard guard(t.workshare_mutex_);
      t.workshares_.erase(seq);
    }
  }
};

namespace detail {

// Per-member (and per explicit task) state hung off the running task.
struct TaskContext : TaskLocal {
  TaskContext(std::shared_ptr<Team> t, int num)
      : team(std::move(t)), thread_num(num), children(std::make_shared<WaitCounter>()),
        deps(std::make_shared<DependencyTable>()) {}

  std::shared_ptr<Team> team;
  int thread_num = 0;
  std::shared_ptr<WaitCounter> children;
  std::shared_ptr<DependencyTable> deps;

  // Constructs encountered so far; members agree on them by position.
  std::uint64_t single_seq = 0;
  std::uint64_t workshare_seq = 0;
  std::shared_ptr<Workshare> active_loop;
  std::uint64_t active_loop_seq = 0;
  std::shared_ptr<Workshare> active_sections;
  std::uint64_t active_sections_seq = 0;
};

inline std::shared_ptr<Team> solo_team() { return std::make_shared<Team>(1, nullptr); }

inline std::unique_ptr<TaskContext>& external_context() noexcept {
  thread_local std::unique_ptr<TaskContext> ctx;
  return ctx;
}

// Context of the caller, or null if it never touched the parallel layer.
inline TaskContext* find_context() noexcept {
  if (this_task::inside()) return dynamic_cast<TaskContext*>(this_task::local());
  return external_context().get();
}

inline TaskContext& context() {
  if (this_task::inside()) {
    if (auto* ctx = dynamic_cast<TaskContext*>(this_task::local())) return *ctx;
    auto owned = std::make_unique<TaskContext>(solo_team(), 0);
    TaskContext* ctx = owned.get();
    this_task::set_local(std::move(owned));
    return *ctx;
  }
  auto& external = external_context();
  if (!external) external = std::make_unique<TaskContext>(solo_team(), 0);
  return *external;
}

struct Icv {
  std::atomic<int> num_threads{0};  // 0: one per worker
  std::atomic<bool> dynamic{false};
};

inline Icv& icv() {
  static Icv v;
  return v;
}

// Identity used for lock ownership: the task, or a stable per-thread id.
inline std::uint64_t owner_key() noexcept {
  if (TaskId id = this_task::id(); id != no_task) return id;
  thread_local const std::uint64_t key = next_task_id();
  return key;
}

}  // namespace detail

// ---------------------------------------------------------------- queries

inline int get_thread_num() noexcept {
  auto* ctx = detail::find_context();
  return ctx ? ctx->thread_num : 0;
}

inline int get_num_threads() noexcept {
  auto* ctx = detail::find_context();
  return ctx ? ctx->team->size() : 1;
}

/// True iff some enclosing region has more than one member.
inline bool in_parallel() noexcept {
  auto* ctx = detail::find_context();
  for (Team* t = ctx ? ctx->team.get() : nullptr; t; t = t->parent().get()) {
    if (t->size() > 1) return true;
  }
  return false;
}

inline int get_num_procs() noexcept { return static_cast<int>(hardware_workers()); }

inline int get_max_threads() {
  if (int n = detail::icv().num_threads.load(std::memory_order_relaxed); n > 0) return n;
  if (Runtime* rt = current_runtime(); rt && rt->running()) return static_cast<int>(rt->num_workers());
  return static_cast<int>(RuntimeConfig::from_env().num_workers);
}

inline void set_num_threads(int n) {
  if (n <= 0) throw Error(Errc::invalid_argument, "set_num_threads needs a positive count, got " + std::to_string(n));
  detail::icv().num_threads.store(n, std::memory_order_relaxed);
}

// Recorded only; teams are never shrunk.
inline bool get_dynamic() noexcept { return detail::icv().dynamic.load(std::memory_order_relaxed); }
inline void set_dynamic(bool on) noexcept { detail::icv().dynamic.store(on, std::memory_order_relaxed); }

inline double get_wtime() noexcept { return detail::seconds_since_origin(); }

inline double get_wtick() noexcept {
  using period = std::chrono::steady_clock::period;
  return static_cast<double>(period::num) / static_cast<double>(period::den);
}

// ---------------------------------------------------------------- fork

/// Runs body(thread_num) on a new team and returns once every member is
/// done. num_threads == 0 takes set_num_threads(), else one member per worker.
inline void fork(Runtime& rt, int num_threads, const std::function<void(int)>& body, const void* codeptr = nullptr) {
  if (num_threads < 0) {
    throw Error(Errc::invalid_argument, "fork with negative team size " + std::to_string(num_threads));
  }
  detail::TaskContext& parent = detail::context();
  int size = num_threads;
  if (size == 0) size = detail::icv().num_threads.load(std::memory_order_relaxed);
  if (size == 0) size = static_cast<int>(rt.num_workers());

  auto team = std::make_shared<Team>(size, parent.team);
  TeamAccess::mark_region(*team);
  detail::tool::parallel_begin(this_task::id(), team->id(), size, codeptr);

  WaitCounter members;
  members.add(static_cast<std::size_t>(size));
  const std::size_t workers = rt.num_workers();
  for (int i = 0; i < size; ++i) {
    rt.spawn(
        [&body, &members, team, i] {
          this_task::set_local(std::make_unique<detail::TaskContext>(team, i));
          detail::tool::implicit_task(ImplicitPhase::Begin, team->id(), i);
          try {
            body(i);
          } catch (...) {
            TeamAccess::record_error(*team, std::current_exception());
          }
          // The region ends with an implicit barrier, which covers the
          // member's outstanding tasks too.
          try {
            TeamAccess::tasks(*team).wait_zero();
          } catch (...) {
            TeamAccess::record_error(*team, std::current_exception());
          }
          detail::tool::implicit_task(ImplicitPhase::End, team->id(), i);
          members.done();
        },
        Priority::Low, WorkerId{static_cast<std::size_t>(i) % workers});
  }
  members.wait_zero();
  detail::tool::parallel_end(team->id());
  if (auto error = TeamAccess::take_error(*team)) std::rethrow_exception(error);
}

inline void fork(int num_threads, const std::function<void(int)>& body, const void* codeptr = nullptr) {
  fork(this_runtime(), num_threads, body, codeptr);
}

// ---------------------------------------------------------------- worksharing

/// Waits for every member of the current team, and for the team's
/// explicit tasks. Outside a region there is nobody to wait for.
inline void barrier_wait() {
  detail::TaskContext& ctx = detail::context();
  Team& team = *ctx.team;
  if (team.size() > 1) TeamAccess::barrier(team).arrive_and_wait();
  TeamAccess::tasks(team).wait_zero();
}

/// True for exactly one member per single construct: the first to arrive.
inline bool single_enter() {
  detail::TaskContext& ctx = detail::context();
  const std::uint64_t k = ++ctx.single_seq;
  std::uint64_t expected = k - 1;
  return TeamAccess::single_claimed(*ctx.team).compare_exchange_strong(expected, k, std::memory_order_acq_rel);
}

constexpr bool master_check(int thread_num) noexcept { return thread_num == 0; }
inline bool master_check() noexcept { return master_check(get_thread_num()); }

namespace detail {

struct CriticalSection {
  CoopMutex mutex;
  std::atomic<std::uint64_t> owner{0};
};

inline CriticalSection& critical_section(const std::string& name) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::unique_ptr<CriticalSection>>* registry =
      new std::map<std::string, std::unique_ptr<CriticalSection>>;
  std::lock_guard guard(registry_mutex);
  auto& slot = (*registry)[name];
  if (!slot) slot = std::make_unique<CriticalSection>();
  return *slot;
}

}  // namespace detail

inline constexpr const char* default_critical = "<default>";

inline void critical_enter(const std::string& name = default_critical) {
  auto& cs = detail::critical_section(name);
  cs.mutex.lock();
  cs.owner.store(detail::owner_key(), std::memory_order_relaxed);
}

inline void critical_exit(const std::string& name = default_critical) {
  auto& cs = detail::critical_section(name);
  if (!cs.mutex.locked() || cs.owner.load(std::memory_order_relaxed) != detail::owner_key()) {
    throw Error(Errc::not_owner, "critical_exit('" + name + "') without matching enter");
  }
  cs.owner.store(0, std::memory_order_relaxed);
  cs.mutex.unlock();
}

/// cell = op(cell), atomically.
template <class T, class Op>
T atomic_update(T& cell, Op op) {
  std::atomic_ref<T> ref(cell);
  T old = ref.load(std::memory_order_relaxed);
  T next = op(old);
  while (!ref.compare_exchange_weak(old, next, std::memory_order_acq_rel, std::memory_order_relaxed)) next = op(old);
  return next;
}

template <class T, class Op>
T atomic_update(std::atomic<T>& cell, Op op) {
  T old = cell.load(std::memory_order_relaxed);
  T next = op(old);
  while (!cell.compare_exchange_weak(old, next, std::memory_order_acq_rel, std::memory_order_relaxed)) next = op(old);
  return next;
}

/// Starts the calling member's next dynamic or guided loop. Every member
/// must start the same loops in the same order.
inline void dispatch_init(SchedKind sched, std::int64_t lower, std::int64_t upper, std::int64_t incr = 1) {
  detail::TaskContext& ctx = detail::context();
  if (ctx.active_loop) throw Error(Errc::loop_mismatch, "dispatch_init while a loop is still being dispatched");
  const std::uint64_t seq = ++ctx.workshare_seq;
  ctx.active_loop =
      TeamAccess::workshare(*ctx.team, seq, detail::Workshare::Loop, sched, lower, upper, incr);
  ctx.active_loop_seq = seq;
}

/// Next chunk of the current loop; empty once the loop is exhausted.
inline std::optional<DispatchCursor::Chunk> dispatch_next() {
  detail::TaskContext& ctx = detail::context();
  if (!ctx.active_loop) throw Error(Errc::loop_mismatch, "dispatch_next without dispatch_init");
  if (auto chunk = ctx.active_loop->cursor.next()) return chunk;
  // The last member out drops the record; ordered waits are all done by
  // then since a member only leaves after its last chunk.
  TeamAccess::leave_workshare(*ctx.team, ctx.active_loop_seq, *ctx.active_loop);
  ctx.active_loop.reset();
  return std::nullopt;
}

/// Blocks until every earlier iteration of the current loop has passed
/// its ordered region. `iteration` is the loop value, not its position.
inline void ordered_wait(std::int64_t iteration) {
  detail::TaskContext& ctx = detail::context();
  if (!ctx.active_loop) throw Error(Errc::loop_mismatch, "ordered outside a dispatched loop");
  ctx.active_loop->ordered.enter(ctx.active_loop->cursor.ordinal_of(iteration));
}

inline void ordered_exit(std::int64_t iteration) {
  detail::TaskContext& ctx = detail::context();
  if (!ctx.active_loop) throw Error(Errc::loop_mismatch, "ordered outside a dispatched loop");
  ctx.active_loop->ordered.exit(ctx.active_loop->cursor.ordinal_of(iteration));
}

/// Hands out each of [0, total) once across the team; empty when none is
/// left, after which the next call opens the member's next sections construct.
inline std::optional<int> sections_next(int total) {
  if (total < 0) throw Error(Errc::invalid_argument, "negative section count");
  detail::TaskContext& ctx = detail::context();
  if (!ctx.active_sections) {
    const std::uint64_t seq = ++ctx.workshare_seq;
    ctx.active_sections = TeamAccess::workshare(*ctx.team, seq, detail::Workshare::Sections, SchedKind::dynamic(1),
                                                0, static_cast<std::int64_t>(total) - 1, 1);
    ctx.active_sections_seq = seq;
  } else if (!ctx.active_sections->cursor.matches(SchedKind::dynamic(1), 0, static_cast<std::int64_t>(total) - 1, 1)) {
    throw Error(Errc::loop_mismatch, "section count changed inside one sections construct");
  }
  if (auto chunk = ctx.active_sections->cursor.next()) return static_cast<int>(chunk->lower);
  TeamAccess::leave_workshare(*ctx.team, ctx.active_sections_seq, *ctx.active_sections);
  ctx.active_sections.reset();
  return std::nullopt;
}

// ---------------------------------------------------------------- tasks

/// Creates an explicit task. It becomes runnable once every sibling it
/// depends on (per `deps`) has finished.
inline TaskId task_spawn(std::function<void()> body, const std::vector<Depend>& deps = {}) {
  Runtime& rt = this_runtime();
  detail::TaskContext& parent = detail::context();
  std::shared_ptr<Team> team = parent.team;
  std::shared_ptr<WaitCounter> siblings = parent.children;
  const int thread_num = parent.thread_num;

  auto node = deps.empty() ? nullptr : std::make_shared<detail::DepNode>();

  siblings->add();
  TeamAccess::tasks(*team).add();
  Task* task = rt.create_task(
      [body = std::move(body), team, siblings, node, thread_num] {
        this_task::set_local(std::make_unique<detail::TaskContext>(team, thread_num));
        try {
          body();
        } catch (...) {
          TeamAccess::record_error(*team, std::current_exception());
        }
        // Children of an explicit task are not awaited unless it calls taskwait.
        if (node) node->complete();
        siblings->done();
        TeamAccess::tasks(*team).done();
      },
      Priority::Normal, deps.size());

  const TaskId id = task->id();
  if (!node) {
    rt.submit(task);
    return id;
  }
  node->id = id;
  node->on_ready = [&rt, task] { rt.submit(task); };
  for (auto& pred : parent.deps->add(node, deps)) {
    node->pending.fetch_add(1, std::memory_order_relaxed);
    if (!pred->add_successor(node)) node->pending.fetch_sub(1, std::memory_order_relaxed);
  }
  node->release();
  return id;
}

/// Waits for the tasks the caller created directly. Outside a region it
/// also rethrows the first exception any such task let escape; inside one
/// that is left to the enclosing fork.
inline void taskwait() {
  detail::TaskContext& ctx = detail::context();
  ctx.children->wait_zero();
  if (!ctx.team->is_region()) {
    if (auto error = TeamAccess::take_error(*ctx.team)) std::rethrow_exception(error);
  }
}

// ---------------------------------------------------------------- locks

/// Non-recursive lock; waiting tasks suspend.
class SimpleLock {
 public:
  void set() {
    mutex_.lock();
    owner_.store(detail::owner_key(), std::memory_order_relaxed);
  }

  bool test() {
    if (!mutex_.try_lock()) return false;
    owner_.store(detail::owner_key(), std::memory_order_relaxed);
    return true;
  }

  void unset() {
    if (!mutex_.locked()) throw Error(Errc::not_owner, "unset of a lock nobody holds");
    if (owner_.load(std::memory_order_relaxed) != detail::owner_key()) {
      throw Error(Errc::not_owner, "unset by a task that does not hold the lock");
    }
    owner_.store(0, std::memory_order_relaxed);
    mutex_.unlock();
  }

  bool held() const noexcept { return mutex_.locked(); }

 private:
  CoopMutex mutex_;
  std::atomic<std::uint64_t> owner_{0};
};

/// Lock its holder may take again; released when the depth returns to zero.
class NestLock {
 public:
  /// Returns the new depth.
  int set() {
    const std::uint64_t me = detail::owner_key();
    if (owner_.load(std::memory_order_relaxed) == me) return ++depth_;
    mutex_.lock();
    owner_.store(me, std::memory_order_relaxed);
    depth_ = 1;
    return 1;
  }

  /// New depth on success, 0 when another task holds it.
  int test() {
    const std::uint64_t me = detail::owner_key();
    if (owner_.load(std::memory_order_relaxed) == me) return ++depth_;
    if (!mutex_.try_lock()) return 0;
    owner_.store(me, std::memory_order_relaxed);
    depth_ = 1;
    return 1;
  }

  /// Returns the remaining depth.
  int unset() {
    if (!mutex_.locked()) throw Error(Errc::not_owner, "unset of a nest lock nobody holds");
    if (owner_.load(std::memory_order_relaxed) != detail::owner_key()) {
      throw Error(Errc::not_owner, "unset by a task that does not hold the nest lock");
    }
    if (--depth_ > 0) return depth_;
    owner_.store(0, std::memory_order_relaxed);
    mutex_.unlock();
    return 0;
  }

  int depth() const noexcept { return depth_; }

 private:
  CoopMutex mutex_;
  std::atomic<std::uint64_t> owner_{0};
  int depth_ = 0;
};

inline SimpleLock* lock_init() { return new SimpleLock; }
inline void lock_destroy(SimpleLock* l) { delete l; }
inline void lock_set(SimpleLock& l) { l.set(); }
inline void lock_unset(SimpleLock& l) { l.unset(); }
inline bool lock_test(SimpleLock& l) { return l.test(); }

inline NestLock* nest_lock_init() { return new NestLock; }
inline void nest_lock_destroy(NestLock* l) { delete l; }
inline void nest_lock_set(NestLock& l) { l.set(); }
inline void nest_lock_unset(NestLock& l) { l.unset(); }
inline int nest_lock_test(NestLock& l) { return l.test(); }

}  // namespace fj
