#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "fj/bench/executors.hpp"
#include "fj/bench/kernels.hpp"
#include "fj/config.hpp"
#include "fj/error.hpp"
#include "fj/loop.hpp"
#include "fj/runtime.hpp"

namespace fj::bench {

struct KernelResult {
  std::uint64_t checksum = 0;
  double seconds = 0.0;
  bool parallel = false;
};

/// Runs the kernel once on prepared operands. Work is split across the
/// executor's team only when the element count reaches the threshold.
inline KernelResult kernel_run(Workload& w, const Executor& exec) {
  w.reset();
  const bool parallel =
      exec.kind() != ExecutorKind::Serial && element_count(w.kind, w.n) >= threshold(w.kind);
  const std::uint64_t units = w.work_units();
  const int team = exec.threads();

  const auto start = std::chrono::steady_clock::now();
  if (parallel) {
    exec.team([&](int tid) {
      LoopAssignment mine = static_init(team, tid, SchedKind::static_block(), 0,
                                        static_cast<std::int64_t>(units) - 1, 1);
      if (!mine.empty()) w.compute(static_cast<std::uint64_t>(mine.lower), static_cast<std::uint64_t>(mine.upper) + 1);
    });
  } else {
    w.compute(0, units);
  }
  const auto stop = std::chrono::steady_clock::now();

  // Guard against a zero reading on very small sizes.
  double seconds = std::chrono::duration<double>(stop - start).count();
  seconds = std::max(seconds, 1e-9);
  return {checksum(w.output()), seconds, parallel};
}

inline KernelResult kernel_run(KernelKind kind, std::uint64_t n, const Executor& exec) {
  Workload w(kind, n);
  return kernel_run(w, exec);
}

/// Checksum of the single-threaded reference run.
inline std::uint64_t oracle_checksum(KernelKind kind, std::uint64_t n) {
  Workload w(kind, n);
  w.compute(0, w.work_units());
  return checksum(w.output());
}

struct SampleRecord {
  KernelKind kernel;
  std::string policy;
  ExecutorKind executor;
  int threads;
  std::uint64_t size;
  int trial;
  double seconds;
  double mflops;
};

struct RatioRecord {
  KernelKind kernel;
  int threads;
  std::uint64_t size;
  double mflops_amt;
  double mflops_baseline;
  double ratio;
};

struct BenchmarkConfig {
  KernelKind kernel = KernelKind::DVecDVecAdd;
  int threads = 1;
  PolicyKind policy = PolicyKind::PriorityLocal;
  std::vector<std::uint64_t> sizes;
  int repetitions = 5;
  ExecutorKind executor = ExecutorKind::Amt;

  void validate() const {
    if (threads < 1) throw Error(Errc::invalid_config, "threads must be at least 1");
    if (repetitions < 1) throw Error(Errc::invalid_config, "repetitions must be at least 1");
    if (sizes.empty()) throw Error(Errc::invalid_config, "no sizes to run");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0) throw Error(Errc::invalid_config, "sizes must be positive");
      if (i > 0 && sizes[i] <= sizes[i - 1]) throw Error(Errc::invalid_config, "sizes must be strictly increasing");
    }
  }
};

/// `steps` element counts spaced evenly from min_elements to max_elements,
/// mapped to kernel sizes (the dimension, for matrices). Sizes that map to
/// the same dimension are dropped.
inline std::vector<std::uint64_t> sweep_sizes(KernelKind kind, std::uint64_t min_elements, std::uint64_t max_elements,
                                              int steps) {
  if (steps < 1) throw Error(Errc::invalid_config, "steps must be at least 1");
  if (min_elements < 1 || max_elements < min_elements) {
    throw Error(Errc::invalid_config, "size range must satisfy 1 <= min <= max");
  }
  std::vector<std::uint64_t> sizes;
  for (int s = 0; s < steps; ++s) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
    const auto elements = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(min_elements) + frac * static_cast<double>(max_elements - min_elements)));
    std::uint64_t n = elements;
    if (is_matrix(kind)) {
      n = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(elements))));
      while (n > 1 && (n - 1) * (n - 1) >= elements) --n;
      while (n * n < elements) ++n;
    }
    if (sizes.empty() || n > sizes.back()) sizes.push_back(n);
  }
  return sizes;
}

inline double mflops(KernelKind kind, std::uint64_t n, double seconds) { return flops(kind, n) / (seconds * 1e6); }

/// Measures every size `repetitions` times, checking each run against the
/// serial checksum before recording it.
inline std::vector<SampleRecord> run_sweep(const BenchmarkConfig& config) {
  config.validate();
  std::unique_ptr<Runtime> runtime;
  std::unique_ptr<OsThreadPool> pool;
  std::optional<Executor> exec;
  switch (config.executor) {
    case ExecutorKind::Amt: {
      RuntimeConfig rc;
      rc.num_workers = static_cast<std::size_t>(config.threads);
      rc.policy = config.policy;
      runtime = std::make_unique<Runtime>(rc);
      exec = Executor::amt(*runtime, config.threads);
      break;
    }
    case ExecutorKind::OsPool:
      pool = std::make_unique<OsThreadPool>(config.threads);
      exec = Executor::pool(*pool);
      break;
    case ExecutorKind::Serial: exec = Executor::serial(); break;
  }
  const std::string policy =
      config.executor == ExecutorKind::Amt ? std::string(to_string(config.policy)) : std::string("none");
  const int threads = config.executor == ExecutorKind::Serial ? 1 : config.threads;

  std::vector<SampleRecord> records;
  for (std::uint64_t n : config.sizes) {
    const std::uint64_t expected = oracle_checksum(config.kernel, n);
    Workload w(config.kernel, n);
    for (int trial = 0; trial < config.repetitions; ++trial) {
      KernelResult r = kernel_run(w, *exec);
      if (r.checksum != expected) {
        throw Error(Errc::checksum_mismatch, std::string(to_string(config.kernel)) + " n=" + std::to_string(n) +
                                                 " executor=" + std::string(to_string(config.executor)) +
                                                 " trial=" + std::to_string(trial) + ": checksum differs from serial");
      }
      records.push_back({config.kernel, policy, config.executor, threads, n, trial, r.seconds,
                         mflops(config.kernel, n, r.seconds)});
    }
  }
  return records;
}

/// Highest MFLOP/s per (kernel, executor, threads, size).
inline std::vector<SampleRecord> best_of_trials(const std::vector<SampleRecord>& records) {
  std::map<std::tuple<KernelKind, ExecutorKind, std::string, int, std::uint64_t>, SampleRecord> best;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.kernel, r.executor, r.policy, r.threads, r.size);
    auto it = best.find(key);
    if (it == best.end() || r.mflops > it->second.mflops) best.insert_or_assign(key, r);
  }
  std::vector<SampleRecord> out;
  out.reserve(best.size());
  for (auto& [key, r] : best) out.push_back(r);
  return out;
}

/// Best runtime MFLOP/s over best baseline MFLOP/s, per shared cell.
inline std::vector<RatioRecord> ratios(const std::vector<SampleRecord>& amt, const std::vector<SampleRecord>& baseline) {
  auto a = best_of_trials(amt);
  auto b = best_of_trials(baseline);
  std::vector<RatioRecord> out;
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (x.kernel == y.kernel && x.threads == y.threads && x.size == y.size) {
        out.push_back({x.kernel, x.threads, x.size, x.mflops, y.mflops, x.mflops / y.mflops});
      }
    }
  }
  return out;
}

inline constexpr const char* sample_header = "kernel,policy,executor,threads,size,trial,seconds,mflops";
inline constexpr const char* ratio_header = "kernel,threads,size,mflops_amt,mflops_baseline,ratio";

inline void write_samples(std::ostream& os, const std::vector<SampleRecord>& records, bool header = true) {
  const auto precision = os.precision(17);
  if (header) os << sample_header << '\n';
  for (const auto& r : records) {
    os << to_string(r.kernel) << ',' << r.policy << ',' << to_string(r.executor) << ',' << r.threads << ',' << r.size
       << ',' << r.trial << ',' << r.seconds << ',' << r.mflops << '\n';
  }
  os.precision(precision);
}

inline void write_ratios(std::ostream& os, const std::vector<RatioRecord>& records, bool header = true) {
  const auto precision = os.precision(17);
  if (header) os << ratio_header << '\n';
  for (const auto& r : records) {
    os << to_string(r.kernel) << ',' << r.threads << ',' << r.size << ',' << r.mflops_amt << ','
       << r.mflops_baseline << ',' << r.ratio << '\n';
  }
  os.precision(precision);
}

}  // namespace fj::bench
