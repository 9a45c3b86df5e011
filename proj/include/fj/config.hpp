#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "fj/error.hpp"

namespace fj {

/// The seven queue disciplines a runtime can be started with.
enum class PolicyKind {
  PriorityLocal,
  StaticPriority,
  Local,
  Global,
  AbpStealing,
  Hierarchical,
  PeriodicPriority,
};

inline constexpr std::array<PolicyKind, 7> all_policies{
    PolicyKind::PriorityLocal, PolicyKind::StaticPriority, PolicyKind::Local,
    PolicyKind::Global,        PolicyKind::AbpStealing,    PolicyKind::Hierarchical,
    PolicyKind::PeriodicPriority,
};

constexpr std::string_view to_string(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::PriorityLocal: return "priority-local";
    case PolicyKind::StaticPriority: return "static-priority";
    case PolicyKind::Local: return "local";
    case PolicyKind::Global: return "global";
    case PolicyKind::AbpStealing: return "abp";
    case PolicyKind::Hierarchical: return "hierarchical";
    case PolicyKind::PeriodicPriority: return "periodic-priority";
  }
  return "unknown";
}

constexpr std::optional<PolicyKind> parse_policy(std::string_view name) noexcept {
  for (PolicyKind kind : all_policies) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

inline std::size_t hardware_workers() noexcept {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

struct RuntimeConfig {
  std::size_t num_workers = hardware_workers();
  PolicyKind policy = PolicyKind::PriorityLocal;
  // Idle retries (each followed by a yield) before a worker sleeps.
  std::size_t spin_before_park = 100;
  // Usable bytes per task stack; a guard page is added below it.
  std::size_t stack_size = 256 * 1024;

  void validate() const {
    if (num_workers < 1) throw Error(Errc::invalid_config, "num_workers must be at least 1");
    if (stack_size < 16 * 1024) throw Error(Errc::invalid_config, "stack_size must be at least 16 KiB");
  }

  /// Defaults overridden by FJ_NUM_THREADS and FJ_POLICY.
  static RuntimeConfig from_env() {
    RuntimeConfig config;
    if (const char* threads = std::getenv("FJ_NUM_THREADS"); threads && *threads) {
      std::string_view text(threads);
      std::size_t value = 0;
      auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || end != text.data() + text.size() || value == 0) {
        throw Error(Errc::invalid_config, "FJ_NUM_THREADS must be a positive integer, got '" +
                                              std::string(text) + "'");
      }
      config.num_workers = value;
    }
    if (const char* policy = std::getenv("FJ_POLICY"); policy && *policy) {
      auto kind = parse_policy(policy);
      if (!kind) throw Error(Errc::invalid_config, "unknown FJ_POLICY '" + std::string(policy) + "'");
      config.policy = *kind;
    }
    return config;
  }

  friend bool operator==(const RuntimeConfig&, const RuntimeConfig&) = default;
};

}  // namespace fj
