#pragma once

#include <chrono>

namespace fj::detail {

using clock = std::chrono::steady_clock;

inline clock::time_point process_origin() noexcept {
  static const clock::time_point origin = clock::now();
  return origin;
}

// Seconds since the first call in this process.
inline double seconds_since_origin() noexcept {
  return std::chrono::duration<double>(clock::now() - process_origin()).count();
}

}  // namespace fj::detail
