#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fj/clock.hpp"
#include "fj/error.hpp"
#include "fj/task.hpp"

namespace fj {

using TeamId = std::uint64_t;
inline constexpr TeamId no_team = 0;

enum class ScheduleCause : std::uint8_t { Complete, Yield, Suspend };
enum class ImplicitPhase : std::uint8_t { Begin, End };

constexpr const char* to_string(ScheduleCause cause) noexcept {
  switch (cause) {
    case ScheduleCause::Complete: return "complete";
    case ScheduleCause::Yield: return "yield";
    case ScheduleCause::Suspend: return "suspend";
  }
  return "unknown";
}

/// First-party observer hooks. Each handler runs synchronously on the
/// thread that triggered the event and may be invoked concurrently from
/// several workers. Unset handlers cost one flag test per event site.
struct ToolCallbacks {
  bool enabled = true;

  std::function<void(WorkerId)> thread_begin;
  std::function<void(WorkerId)> thread_end;
  // parent task (no_task from outside the runtime), new team, size, caller label
  std::function<void(TaskId, TeamId, int, const void*)> parallel_begin;
  std::function<void(TeamId)> parallel_end;
  // creator (no_task from outside the runtime), new task, dependence count
  std::function<void(TaskId, TaskId, std::size_t)> task_create;
  // task leaving its worker, why, task the worker runs next (no_task if idle)
  std::function<void(TaskId, ScheduleCause, TaskId)> task_schedule;
  std::function<void(ImplicitPhase, TeamId, int)> implicit_task;
};

namespace detail::tool {

enum : std::uint32_t {
  kThreadBegin = 1u << 0,
  kThreadEnd = 1u << 1,
  kParallelBegin = 1u << 2,
  kParallelEnd = 1u << 3,
  kTaskCreate = 1u << 4,
  kTaskSchedule = 1u << 5,
  kImplicitTask = 1u << 6,
  kAll = (1u << 7) - 1,
};

struct Registry {
  std::atomic<std::uint32_t> mask{0};
  std::atomic<const ToolCallbacks*> current{nullptr};
  std::atomic<std::uint64_t> failures{0};
  std::atomic<bool> logging{false};

  std::mutex mutex;
  // Replaced callback sets stay alive: an emitter may still hold the old pointer.
  std::vector<std::unique_ptr<ToolCallbacks>> installed;
  std::unique_ptr<std::ofstream> log;
  std::string log_path;
  std::mutex log_mutex;
  std::uint32_t handler_bits = 0;

  void publish_mask() {
    logging.store(log != nullptr, std::memory_order_release);
    mask.store(handler_bits | (log ? kAll : 0u), std::memory_order_release);
  }
};

inline Registry& registry() {
  static Registry* r = new Registry;
  return *r;
}

inline std::uint32_t bits_of(const ToolCallbacks& cb) {
  if (!cb.enabled) return 0;
  std::uint32_t bits = 0;
  if (cb.thread_begin) bits |= kThreadBegin;
  if (cb.thread_end) bits |= kThreadEnd;
  if (cb.parallel_begin) bits |= kParallelBegin;
  if (cb.parallel_end) bits |= kParallelEnd;
  if (cb.task_create) bits |= kTaskCreate;
  if (cb.task_schedule) bits |= kTaskSchedule;
  if (cb.implicit_task) bits |= kImplicitTask;
  return bits;
}

inline bool active(std::uint32_t bit) noexcept {
  return (registry().mask.load(std::memory_order_acquire) & bit) != 0;
}

template <class Handler, class... Args>
void invoke(const Handler& handler, Args&&... args) noexcept {
  if (!handler) return;
  try {
    handler(std::forward<Args>(args)...);
  } catch (const std::exception& e) {
    if (registry().failures.fetch_add(1, std::memory_order_relaxed) < 8) {
      std::fprintf(stderr, "fj: tool handler threw: %s\n", e.what());
    }
  } catch (...) {
    if (registry().failures.fetch_add(1, std::memory_order_relaxed) < 8) {
      std::fprintf(stderr, "fj: tool handler threw a non-standard exception\n");
    }
  }
}

inline const ToolCallbacks* callbacks() noexcept {
  const ToolCallbacks* cb = registry().current.load(std::memory_order_acquire);
  return (cb && cb->enabled) ? cb : nullptr;
}

// Set by the scheduler; -1 outside worker threads.
inline std::int64_t& log_worker_slot() noexcept {
  thread_local std::int64_t worker = -1;
  return worker;
}

inline void write_log(const char* kind, TaskId task, TeamId team, nlohmann::json extra = {}) {
  Registry& r = registry();
  nlohmann::json line = {
      {"kind", kind},
      {"timestamp", seconds_since_origin()},
      {"worker", log_worker_slot()},
      {"task", task},
      {"team", team},
  };
  if (extra.is_object()) line.update(extra);
  std::string text = line.dump();
  std::lock_guard guard(r.log_mutex);
  if (r.log) *r.log << text << '\n';
}

inline bool log_open() noexcept { return registry().logging.load(std::memory_order_acquire); }

inline void thread_begin(WorkerId w) {
  if (!active(kThreadBegin)) return;
  if (auto* cb = callbacks()) invoke(cb->thread_begin, w);
  if (log_open()) write_log("thread_begin", no_task, no_team);
}

inline void thread_end(WorkerId w) {
  if (!active(kThreadEnd)) return;
  if (auto* cb = callbacks()) invoke(cb->thread_end, w);
  if (log_open()) write_log("thread_end", no_task, no_team);
}

inline void parallel_begin(TaskId parent, TeamId team, int size, const void* codeptr) {
  if (!active(kParallelBegin)) return;
  if (auto* cb = callbacks()) invoke(cb->parallel_begin, parent, team, size, codeptr);
  if (log_open()) write_log("parallel_begin", parent, team, {{"team_size", size}});
}

inline void parallel_end(TeamId team) {
  if (!active(kParallelEnd)) return;
  if (auto* cb = callbacks()) invoke(cb->parallel_end, team);
  if (log_open()) write_log("parallel_end", no_task, team);
}

inline void task_create(TaskId creator, TaskId task, std::size_t deps) {
  if (!active(kTaskCreate)) return;
  if (auto* cb = callbacks()) invoke(cb->task_create, creator, task, deps);
  if (log_open()) write_log("task_create", task, no_team, {{"creator", creator}, {"deps", deps}});
}

inline void task_schedule(TaskId prior, ScheduleCause cause, TaskId next) {
  if (!active(kTaskSchedule)) return;
  if (auto* cb = callbacks()) invoke(cb->task_schedule, prior, cause, next);
  if (log_open()) write_log("task_schedule", prior, no_team, {{"cause", to_string(cause)}, {"next", next}});
}

inline void implicit_task(ImplicitPhase phase, TeamId team, int thread_num) {
  if (!active(kImplicitTask)) return;
  if (auto* cb = callbacks()) invoke(cb->implicit_task, phase, team, thread_num);
  if (log_open()) {
    write_log(phase == ImplicitPhase::Begin ? "implicit_task_begin" : "implicit_task_end", no_task, team,
              {{"thread_num", thread_num}});
  }
}

}  // namespace detail::tool

/// Installs `callbacks`, replacing any previous registration. Takes effect
/// for events raised after the call returns.
inline void register_tool(ToolCallbacks callbacks) {
  auto& r = detail::tool::registry();
  std::lock_guard guard(r.mutex);
  auto owned = std::make_unique<ToolCallbacks>(std::move(callbacks));
  r.handler_bits = detail::tool::bits_of(*owned);
  r.current.store(owned.get(), std::memory_order_release);
  r.installed.push_back(std::move(owned));
  r.publish_mask();
}

inline void clear_tool() {
  auto& r = detail::tool::registry();
  std::lock_guard guard(r.mutex);
  r.handler_bits = 0;
  r.current.store(nullptr, std::memory_order_release);
  r.publish_mask();
}

/// Number of handler invocations that threw since process start.
inline std::uint64_t tool_handler_failures() noexcept {
  return detail::tool::registry().failures.load(std::memory_order_relaxed);
}

/// Starts writing one JSON object per event to `path` (truncating it).
inline void open_event_log(const std::string& path) {
  auto& r = detail::tool::registry();
  std::lock_guard guard(r.mutex);
  auto file = std::make_unique<std::ofstream>(path, std::ios::out | std::ios::trunc);
  if (!*file) throw Error(Errc::invalid_config, "cannot open event log '" + path + "'");
  {
    std::lock_guard log_guard(r.log_mutex);
    r.log = std::move(file);
    r.log_path = path;
  }
  r.publish_mask();
}

inline void close_event_log() {
  auto& r = detail::tool::registry();
  std::lock_guard guard(r.mutex);
  {
    std::lock_guard log_guard(r.log_mutex);
    r.log.reset();
    r.log_path.clear();
  }
  r.publish_mask();
}

/// Honors FJ_TOOL_LOG=<path>. A path already open is left alone.
inline void open_event_log_from_env() {
  const char* path = std::getenv("FJ_TOOL_LOG");
  if (!path || !*path) return;
  auto& r = detail::tool::registry();
  {
    std::lock_guard guard(r.mutex);
    if (r.log && r.log_path == path) return;
  }
  open_event_log(path);
}

}  // namespace fj
