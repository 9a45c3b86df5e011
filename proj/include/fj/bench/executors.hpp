#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <string_view>
#include <thread>
#include <vector>

#include "fj/error.hpp"
#include "fj/loop.hpp"
#include "fj/parallel.hpp"
#include "fj/runtime.hpp"

namespace fj::bench {

enum class ExecutorKind : std::uint8_t { Amt, OsPool, Serial };

constexpr std::string_view to_string(ExecutorKind e) noexcept {
  switch (e) {
    case ExecutorKind::Amt: return "amt";
    case ExecutorKind::OsPool: return "ospool";
    case ExecutorKind::Serial: return "serial";
  }
  return "unknown";
}

inline ExecutorKind parse_executor(std::string_view name) {
  for (auto e : {ExecutorKind::Amt, ExecutorKind::OsPool, ExecutorKind::Serial}) {
    if (to_string(e) == name) return e;
  }
  throw Error(Errc::invalid_argument, "unknown executor '" + std::string(name) + "'");
}

/// Fixed OS threads that run one team-wide function at a time. The caller
/// acts as member 0.
class OsThreadPool {
 public:
  explicit OsThreadPool(int threads) : size_(threads) {
    if (threads < 1) throw Error(Errc::invalid_argument, "thread pool needs at least one thread");
    for (int t = 1; t < threads; ++t) workers_.emplace_back([this, t] { loop(t); });
  }

  ~OsThreadPool() {
    {
      std::lock_guard guard(mutex_);
      stop_ = true;
    }
    start_cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  OsThreadPool(const OsThreadPool&) = delete;
  OsThreadPool& operator=(const OsThreadPool&) = delete;

  int size() const noexcept { return size_; }

  void run(const std::function<void(int)>& fn) {
    {
      std::lock_guard guard(mutex_);
      job_ = &fn;
      remaining_ = size_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    start_cv_.notify_all();
    try {
      fn(0);
    } catch (...) {
      std::lock_guard guard(mutex_);
      if (!error_) error_ = std::current_exception();
    }
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [&] { return remaining_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
  }

 private:
  void loop(int tid) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job;
      {
        std::unique_lock lock(mutex_);
        start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      std::exception_ptr error;
      try {
        (*job)(tid);
      } catch (...) {
        error = std::current_exception();
      }
      std::lock_guard guard(mutex_);
      if (error && !error_) error_ = error;
      if (--remaining_ == 0) done_cv_.notify_one();
    }
  }

  int size_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  int remaining_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

/// Runs a team-wide function on one of the executors.
class Executor {
 public:
  static Executor serial() { return Executor(ExecutorKind::Serial, 1); }
  static Executor amt(Runtime& rt, int threads) {
    Executor e(ExecutorKind::Amt, threads);
    e.runtime_ = &rt;
    return e;
  }
  static Executor pool(OsThreadPool& pool) {
    Executor e(ExecutorKind::OsPool, pool.size());
    e.pool_ = &pool;
    return e;
  }

  ExecutorKind kind() const noexcept { return kind_; }
  int threads() const noexcept { return threads_; }

  /// Calls fn(tid) for every member of a team of threads().
  void team(const std::function<void(int)>& fn) const {
    switch (kind_) {
      case ExecutorKind::Serial: fn(0); return;
      case ExecutorKind::Amt: fork(*runtime_, threads_, fn); return;
      case ExecutorKind::OsPool: pool_->run(fn); return;
    }
  }

 private:
  Executor(ExecutorKind kind, int threads) : kind_(kind), threads_(threads) {}

  ExecutorKind kind_;
  int threads_;
  Runtime* runtime_ = nullptr;
  OsThreadPool* pool_ = nullptr;
};

}  // namespace fj::bench
