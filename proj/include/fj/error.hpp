#pragma once

#include <stdexcept>
#include <string>

namespace fj {

enum class Errc {
  invalid_config,
  config_conflict,
  not_started,
  shutdown,
  not_in_task,
  invalid_token,
  double_resume,
  invalid_argument,
  not_owner,
  loop_mismatch,
  duplicate_iteration,
  checksum_mismatch,
};

constexpr const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_config: return "invalid_config";
    case Errc::config_conflict: return "config_conflict";
    case Errc::not_started: return "not_started";
    case Errc::shutdown: return "shutdown";
    case Errc::not_in_task: return "not_in_task";
    case Errc::invalid_token: return "invalid_token";
    case Errc::double_resume: return "double_resume";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::not_owner: return "not_owner";
    case Errc::loop_mismatch: return "loop_mismatch";
    case Errc::duplicate_iteration: return "duplicate_iteration";
    case Errc::checksum_mismatch: return "checksum_mismatch";
  }
  return "unknown";
}

/// Every runtime-reported failure is an `fj::Error` carrying an `Errc`.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fj
