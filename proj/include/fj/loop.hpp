#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>

#include "fj/error.hpp"

namespace fj {

struct SchedKind {
  enum Kind : std::uint8_t { StaticBlock, StaticChunked, Dynamic, Guided };

  Kind kind = StaticBlock;
  std::int64_t chunk = 1;

  static constexpr SchedKind static_block() noexcept { return {StaticBlock, 1}; }
  static constexpr SchedKind static_chunked(std::int64_t c) noexcept { return {StaticChunked, c}; }
  static constexpr SchedKind dynamic(std::int64_t c = 1) noexcept { return {Dynamic, c}; }
  static constexpr SchedKind guided(std::int64_t c = 1) noexcept { return {Guided, c}; }

  constexpr bool is_static() const noexcept { return kind == StaticBlock || kind == StaticChunked; }

  friend constexpr bool operator==(SchedKind, SchedKind) = default;
};

namespace detail {

// Number of iterations in L..U (inclusive) stepping by incr.
inline std::uint64_t trip_count(std::int64_t lower, std::int64_t upper, std::int64_t incr) {
  if (incr == 0) throw Error(Errc::invalid_argument, "loop increment must be non-zero");
  if (incr > 0) {
    if (lower > upper) return 0;
    return (static_cast<std::uint64_t>(upper) - static_cast<std::uint64_t>(lower)) / static_cast<std::uint64_t>(incr) + 1;
  }
  if (lower < upper) return 0;
  std::uint64_t step = static_cast<std::uint64_t>(0) - static_cast<std::uint64_t>(incr);
  return (static_cast<std::uint64_t>(lower) - static_cast<std::uint64_t>(upper)) / step + 1;
}

// Value of the iteration with the given ordinal.
inline std::int64_t iteration_value(std::int64_t lower, std::int64_t incr, std::uint64_t ordinal) noexcept {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(lower) + ordinal * static_cast<std::uint64_t>(incr));
}

}  // namespace detail

/// One member's share of a statically scheduled loop.
///
/// The member runs lower, lower+incr, ... up to upper, then repeats from
/// lower+stride, lower+2*stride, ... with the same chunk length, stopping
/// at the loop's own bound. For a block schedule the first chunk is all
/// there is.
struct LoopAssignment {
  std::int64_t lower = 0;
  std::int64_t upper = -1;
  std::int64_t stride = 1;
  std::int64_t incr = 1;
  std::int64_t bound = -1;  // the loop's inclusive upper bound
  bool last_iter = false;

  // Ordinal bookkeeping, used by for_each_iteration.
  std::uint64_t first = 0;
  std::uint64_t chunk = 0;
  std::uint64_t step = 0;
  std::uint64_t trip = 0;

  bool empty() const noexcept { return chunk == 0; }

  template <class Fn>
  void for_each_iteration(Fn&& fn) const {
    if (empty()) return;
    std::int64_t loop_lower = detail::iteration_value(lower, -incr, first);
    for (std::uint64_t base = first; base < trip; base += step) {
      std::uint64_t end = std::min(trip, base + chunk);
      for (std::uint64_t ord = base; ord < end; ++ord) fn(detail::iteration_value(loop_lower, incr, ord));
    }
  }
};

/// Static loop partitioning for member `tid` of a team of `team_size`,
/// over lower..upper (inclusive) stepping by `incr`.
inline LoopAssignment static_init(std::int64_t team_size, std::int64_t tid, SchedKind sched, std::int64_t lower,
                                  std::int64_t upper, std::int64_t incr) {
  if (team_size < 1 || tid < 0 || tid >= team_size) {
    throw Error(Errc::invalid_argument, "static_init: thread " + std::to_string(tid) + " outside team of " +
                                            std::to_string(team_size));
  }
  if (!sched.is_static()) throw Error(Errc::invalid_argument, "static_init needs a static schedule");
  if (sched.kind == SchedKind::StaticChunked && sched.chunk < 1) {
    throw Error(Errc::invalid_argument, "chunk size must be at least 1");
  }
  const std::uint64_t n = detail::trip_count(lower, upper, incr);
  const auto T = static_cast<std::uint64_t>(team_size);
  const auto t = static_cast<std::uint64_t>(tid);

  LoopAssignment a;
  a.incr = incr;
  a.bound = upper;
  a.trip = n;

  auto set_empty = [&] {
    a.lower = lower;
    a.upper = detail::iteration_value(lower, incr, 0) - incr;
    a.stride = detail::iteration_value(0, incr, n == 0 ? 1 : n);
    a.chunk = 0;
    return a;
  };

  if (sched.kind == SchedKind::StaticBlock) {
    const std::uint64_t base = n / T;
    const std::uint64_t extra = n % T;
    const std::uint64_t count = base + (t < extra ? 1 : 0);
    const std::uint64_t start = t * base + std::min(t, extra);
    if (count == 0) return set_empty();
    a.first = start;
    a.chunk = count;
    a.step = n;
    a.lower = detail::iteration_value(lower, incr, start);
    a.upper = detail::iteration_value(lower, incr, start + count - 1);
    a.stride = detail::iteration_value(0, incr, n);
    a.last_iter = start + count == n;
    return a;
  }

  const auto c = static_cast<std::uint64_t>(sched.chunk);
  const std::uint64_t start = t * c;
  if (start >= n) return set_empty();
  const std::uint64_t chunks = (n + c - 1) / c;
  a.first = start;
  a.chunk = c;
  a.step = c * T;
  a.lower = detail::iteration_value(lower, incr, start);
  a.upper = detail::iteration_value(lower, incr, std::min(start + c, n) - 1);
  a.stride = detail::iteration_value(0, incr, c * T);
  a.last_iter = (chunks - 1) % T == t;
  return a;
}

/// Shared cursor handing out chunks of a dynamic or guided loop.
class DispatchCursor {
 public:
  struct Chunk {
    std::int64_t lower;
    std::int64_t upper;  // inclusive
    bool last;           // holds the sequentially last iteration
  };

  DispatchCursor(std::int64_t team_size, SchedKind sched, std::int64_t lower, std::int64_t upper, std::int64_t incr)
      : team_size_(team_size), sched_(sched), lower_(lower), upper_(upper), incr_(incr),
        trip_(detail::trip_count(lower, upper, incr)) {
    if (team_size < 1) throw Error(Errc::invalid_argument, "dispatch needs a team of at least one");
    if (sched.is_static()) throw Error(Errc::invalid_argument, "dispatch needs a dynamic or guided schedule");
    if (sched.chunk < 1) throw Error(Errc::invalid_argument, "chunk size must be at least 1");
  }

  bool matches(SchedKind sched, std::int64_t lower, std::int64_t upper, std::int64_t incr) const noexcept {
    return sched == sched_ && lower == lower_ && upper == upper_ && incr == incr_;
  }

  std::uint64_t trip_count() const noexcept { return trip_; }

  std::optional<Chunk> next() {
    const auto c = static_cast<std::uint64_t>(sched_.chunk);
    std::uint64_t begin;
    std::uint64_t end;
    if (sched_.kind == SchedKind::Dynamic) {
      begin = next_.fetch_add(c, std::memory_order_relaxed);
      if (begin >= trip_) return std::nullopt;
      end = std::min(trip_, begin + c);
    } else {
      begin = next_.load(std::memory_order_relaxed);
      do {
        if (begin >= trip_) return std::nullopt;
        std::uint64_t remaining = trip_ - begin;
        std::uint64_t share = (remaining + static_cast<std::uint64_t>(team_size_) - 1) /
                              static_cast<std::uint64_t>(team_size_);
        end = begin + std::min(remaining, std::max(share, c));
      } while (!next_.compare_exchange_weak(begin, end, std::memory_order_relaxed));
    }
    return Chunk{detail::iteration_value(lower_, incr_, begin), detail::iteration_value(lower_, incr_, end - 1),
                 end == trip_};
  }

  /// Ordinal of an iteration value of this loop.
  std::uint64_t ordinal_of(std::int64_t value) const noexcept {
    return static_cast<std::uint64_t>((value - lower_) / incr_);
  }

 private:
  std::int64_t team_size_;
  SchedKind sched_;
  std::int64_t lower_;
  std::int64_t upper_;
  std::int64_t incr_;
  std::uint64_t trip_;
  std::atomic<std::uint64_t> next_{0};
};

}  // namespace fj
