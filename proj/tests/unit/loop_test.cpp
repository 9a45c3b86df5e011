#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "fj/loop.hpp"

namespace {

using fj::SchedKind;

// Every iteration value of L..U stepping by incr, in order.
std::vector<std::int64_t> space(std::int64_t L, std::int64_t U, std::int64_t incr) {
  std::vector<std::int64_t> out;
  if (incr > 0) {
    for (std::int64_t i = L; i <= U; i += incr) out.push_back(i);
  } else {
    for (std::int64_t i = L; i >= U; i += incr) out.push_back(i);
  }
  return out;
}

std::vector<std::int64_t> iterations(const fj::LoopAssignment& a) {
  std::vector<std::int64_t> out;
  a.for_each_iteration([&](std::int64_t i) { out.push_back(i); });
  return out;
}

TEST(StaticInit, SingleThreadTakesEverything) {
  auto a = fj::static_init(1, 0, SchedKind::static_block(), 0, 99, 1);
  EXPECT_EQ(a.lower, 0);
  EXPECT_EQ(a.upper, 99);
  EXPECT_TRUE(a.last_iter);
}

TEST(StaticInit, EvenBlocks) {
  auto a = fj::static_init(4, 0, SchedKind::static_block(), 0, 99, 1);
  EXPECT_EQ(a.lower, 0);
  EXPECT_EQ(a.upper, 24);
  EXPECT_FALSE(a.last_iter);
  auto d = fj::static_init(4, 3, SchedKind::static_block(), 0, 99, 1);
  EXPECT_EQ(d.lower, 75);
  EXPECT_EQ(d.upper, 99);
  EXPECT_TRUE(d.last_iter);
}

TEST(StaticInit, RemainderGoesToFirstThreads) {
  // 10 iterations over 4 threads: 3, 3, 2, 2.
  const std::int64_t expect[4][2] = {{0, 2}, {3, 5}, {6, 7}, {8, 9}};
  for (int t = 0; t < 4; ++t) {
    auto a = fj::static_init(4, t, SchedKind::static_block(), 0, 9, 1);
    EXPECT_EQ(a.lower, expect[t][0]) << t;
    EXPECT_EQ(a.upper, expect[t][1]) << t;
  }
}

TEST(StaticInit, ChunkedRoundRobin) {
  auto a = fj::static_init(4, 2, SchedKind::static_chunked(10), 0, 99, 1);
  EXPECT_EQ(a.lower, 20);
  EXPECT_EQ(a.upper, 29);
  EXPECT_EQ(a.stride, 40);
  EXPECT_EQ(iterations(a), (std::vector<std::int64_t>{20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 60, 61, 62, 63, 64,
                                                       65, 66, 67, 68, 69}));
  // Chunk 9 (90..99) is the last one and belongs to thread 1.
  EXPECT_TRUE(fj::static_init(4, 1, SchedKind::static_chunked(10), 0, 99, 1).last_iter);
  EXPECT_FALSE(a.last_iter);
}

TEST(StaticInit, NegativeIncrement) {
  auto a = fj::static_init(2, 1, SchedKind::static_block(), 10, 1, -1);
  EXPECT_EQ(a.lower, 5);
  EXPECT_EQ(a.upper, 1);
  EXPECT_TRUE(a.last_iter);
  EXPECT_EQ(iterations(a), (std::vector<std::int64_t>{5, 4, 3, 2, 1}));
}

TEST(StaticInit, EmptySpace) {
  auto a = fj::static_init(3, 0, SchedKind::static_block(), 5, 4, 1);
  EXPECT_TRUE(a.empty());
  EXPECT_GT(a.lower, a.upper);
  EXPECT_FALSE(a.last_iter);
  EXPECT_TRUE(iterations(a).empty());
}

TEST(StaticInit, MoreThreadsThanIterations) {
  auto a = fj::static_init(8, 5, SchedKind::static_block(), 0, 2, 1);
  EXPECT_TRUE(a.empty());
  EXPECT_TRUE(fj::static_init(8, 2, SchedKind::static_block(), 0, 2, 1).last_iter);
}

TEST(StaticInit, RejectsBadArguments) {
  EXPECT_THROW(fj::static_init(4, 0, SchedKind::static_block(), 0, 9, 0), fj::Error);
  EXPECT_THROW(fj::static_init(4, 4, SchedKind::static_block(), 0, 9, 1), fj::Error);
  EXPECT_THROW(fj::static_init(0, 0, SchedKind::static_block(), 0, 9, 1), fj::Error);
  EXPECT_THROW(fj::static_init(4, 0, SchedKind::static_chunked(0), 0, 9, 1), fj::Error);
  EXPECT_THROW(fj::static_init(4, 0, SchedKind::dynamic(1), 0, 9, 1), fj::Error);
}

TEST(StaticInit, PartitionPropertyLargerSpaces) {
  const std::vector<std::int64_t> sizes = {0, 1, 999, 4096, 10'000};
  for (std::int64_t T : {1, 3, 7, 16}) {
    for (std::int64_t incr : {1, 2, 3, -1}) {
      for (std::int64_t n : sizes) {
        for (std::int64_t chunk : {0, 1, 7, 10}) {
          const std::int64_t L = incr > 0 ? -17 : 50;
          const std::int64_t U = incr > 0 ? L + (n - 1) * incr : L + (n - 1) * incr;
          auto expected = space(L, U, incr);
          auto sched = chunk == 0 ? SchedKind::static_block() : SchedKind::static_chunked(chunk);
          std::vector<std::int64_t> got;
          int last_owners = 0;
          for (std::int64_t t = 0; t < T; ++t) {
            auto a = fj::static_init(T, t, sched, L, U, incr);
            auto mine = iterations(a);
            got.insert(got.end(), mine.begin(), mine.end());
            if (a.last_iter) {
              ++last_owners;
              ASSERT_FALSE(mine.empty());
              EXPECT_EQ(mine.back(), expected.back());
            }
          }
          std::sort(got.begin(), got.end());
          std::sort(expected.begin(), expected.end());
          ASSERT_EQ(got, expected) << "T=" << T << " incr=" << incr << " n=" << n << " chunk=" << chunk;
          EXPECT_EQ(last_owners, n == 0 ? 0 : 1);
        }
      }
    }
  }
}

TEST(Dispatch, DynamicChunksInOrder) {
  fj::DispatchCursor cursor(1, SchedKind::dynamic(10), 0, 99, 1);
  for (std::int64_t k = 0; k < 10; ++k) {
    auto c = cursor.next();
    ASSERT_TRUE(c.has_value());
    EXPECT_EQ(c->lower, 10 * k);
    EXPECT_EQ(c->upper, 10 * k + 9);
    EXPECT_EQ(c->last, k == 9);
  }
  EXPECT_FALSE(cursor.next().has_value());
  EXPECT_FALSE(cursor.next().has_value());
}

TEST(Dispatch, EmptySpace) {
  fj::DispatchCursor dyn(4, SchedKind::dynamic(3), 10, 9, 1);
  EXPECT_FALSE(dyn.next().has_value());
  fj::DispatchCursor gui(4, SchedKind::guided(3), 0, 1, -1);
  EXPECT_FALSE(gui.next().has_value());
}

TEST(Dispatch, GuidedShrinks) {
  fj::DispatchCursor cursor(4, SchedKind::guided(1), 0, 99, 1);
  std::int64_t remaining = 100;
  std::int64_t previous = 100;
  std::int64_t next_lower = 0;
  bool first = true;
  while (auto c = cursor.next()) {
    const std::int64_t size = c->upper - c->lower + 1;
    // Oracle: ceil(remaining / T), at least the chunk.
    EXPECT_EQ(size, std::max<std::int64_t>((remaining + 3) / 4, 1));
    if (first) EXPECT_EQ(size, 25);
    first = false;
    EXPECT_LE(size, previous);
    EXPECT_EQ(c->lower, next_lower);
    previous = size;
    next_lower = c->upper + 1;
    remaining -= size;
  }
  EXPECT_EQ(remaining, 0);
}

TEST(Dispatch, GuidedRespectsMinimumChunk) {
  fj::DispatchCursor cursor(4, SchedKind::guided(8), 0, 19, 1);
  std::vector<std::int64_t> sizes;
  while (auto c = cursor.next()) sizes.push_back(c->upper - c->lower + 1);
  EXPECT_EQ(sizes, (std::vector<std::int64_t>{8, 8, 4}));
}

TEST(Dispatch, StridedValues) {
  fj::DispatchCursor cursor(2, SchedKind::dynamic(2), 100, 91, -3);
  auto a = cursor.next();
  auto b = cursor.next();
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->lower, 100);
  EXPECT_EQ(a->upper, 97);
  EXPECT_EQ(b->lower, 94);
  EXPECT_EQ(b->upper, 91);
  EXPECT_TRUE(b->last);
  EXPECT_EQ(cursor.ordinal_of(94), 2u);
}

TEST(Dispatch, ConcurrentDrainClaimsEachIterationOnce) {
  for (auto sched : {SchedKind::dynamic(1), SchedKind::dynamic(7), SchedKind::guided(1), SchedKind::guided(5)}) {
    constexpr std::int64_t n = 100'000;
    fj::DispatchCursor cursor(8, sched, 0, n - 1, 1);
    std::vector<std::atomic<int>> hits(n);
    std::atomic<int> lasts{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&] {
        while (auto c = cursor.next()) {
          for (std::int64_t i = c->lower; i <= c->upper; ++i) hits[i].fetch_add(1);
          if (c->last) lasts.fetch_add(1);
        }
      });
    }
    for (auto& t : threads) t.join();
    int bad = 0;
    for (auto& h : hits) bad += h.load() != 1;
    EXPECT_EQ(bad, 0);
    EXPECT_EQ(lasts.load(), 1);
  }
}

TEST(Dispatch, RejectsBadSchedules) {
  EXPECT_THROW(fj::DispatchCursor(4, SchedKind::static_block(), 0, 9, 1), fj::Error);
  EXPECT_THROW(fj::DispatchCursor(4, SchedKind::dynamic(0), 0, 9, 1), fj::Error);
  EXPECT_THROW(fj::DispatchCursor(0, SchedKind::dynamic(1), 0, 9, 1), fj::Error);
  EXPECT_THROW(fj::DispatchCursor(4, SchedKind::dynamic(1), 0, 9, 0), fj::Error);
}

}  // namespace
