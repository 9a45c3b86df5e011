// Benchmark driver: sweeps one kernel over a range of sizes and writes
// per-trial samples, plus runtime/baseline ratios on request.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fj/bench/harness.hpp"
#include "fj/config.hpp"
#include "fj/error.hpp"

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw fj::Error(fj::Errc::invalid_config, "cannot write '" + path + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel benchmark for the fork-join runtime"};

  std::string kernel = "dvecdvecadd";
  int threads = static_cast<int>(fj::hardware_workers());
  std::string policy = "priority-local";
  std::string executor = "amt";
  std::uint64_t min_size = 1'000;
  std::uint64_t max_size = 1'000'000;
  int steps = 20;
  int reps = 5;
  std::string out_path;
  std::string ratios_path;
  std::string baseline = "ospool";

  app.add_option("--kernel", kernel, "dvecdvecadd | daxpy | dmatdmatadd | dmatdmatmult")->capture_default_str();
  app.add_option("--threads", threads, "Team size and worker count")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--policy", policy, "Scheduling policy of the runtime executor")->capture_default_str();
  app.add_option("--executor", executor, "amt | ospool | serial")->capture_default_str();
  app.add_option("--min-size", min_size, "Smallest element count")->capture_default_str();
  app.add_option("--max-size", max_size, "Largest element count")->capture_default_str();
  app.add_option("--steps", steps, "Number of sizes in the sweep")->capture_default_str();
  app.add_option("--reps", reps, "Trials per size")->capture_default_str();
  app.add_option("--out", out_path, "Sample CSV (stdout when omitted)");
  app.add_option("--ratios", ratios_path, "Also run the baseline and write amt/baseline ratios here");
  app.add_option("--baseline", baseline, "Executor the ratios compare against")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    fj::bench::BenchmarkConfig config;
    config.kernel = fj::bench::parse_kernel(kernel);
    config.threads = threads;
    auto kind = fj::parse_policy(policy);
    if (!kind) throw fj::Error(fj::Errc::invalid_config, "unknown policy '" + policy + "'");
    config.policy = *kind;
    config.executor = fj::bench::parse_executor(executor);
    config.sizes = fj::bench::sweep_sizes(config.kernel, min_size, max_size, steps);
    config.repetitions = reps;

    std::vector<fj::bench::SampleRecord> samples = fj::bench::run_sweep(config);
    std::vector<fj::bench::SampleRecord> baseline_samples;
    if (!ratios_path.empty()) {
      if (config.executor != fj::bench::ExecutorKind::Amt) {
        throw fj::Error(fj::Errc::invalid_config, "--ratios needs --executor amt");
      }
      fj::bench::BenchmarkConfig base = config;
      base.executor = fj::bench::parse_executor(baseline);
      baseline_samples = fj::bench::run_sweep(base);
    }

    if (out_path.empty()) {
      fj::bench::write_samples(std::cout, samples);
      fj::bench::write_samples(std::cout, baseline_samples, false);
    } else {
      std::ofstream out = open_output(out_path);
      fj::bench::write_samples(out, samples);
      fj::bench::write_samples(out, baseline_samples, false);
    }
    if (!ratios_path.empty()) {
      std::ofstream out = open_output(ratios_path);
      fj::bench::write_ratios(out, fj::bench::ratios(samples, baseline_samples));
    }
  } catch (const fj::Error& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return e.code() == fj::Errc::checksum_mismatch ? 3 : 2;
  }
  return 0;
}
