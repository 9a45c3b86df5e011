#include <atomic>
#include <memory>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "fj/policies.hpp"
#include "fj/task.hpp"

namespace {

using fj::Priority;
using fj::Task;
using fj::WorkerId;

std::vector<std::unique_ptr<Task>> make_tasks(std::size_t n, Priority p = Priority::Normal) {
  std::vector<std::unique_ptr<Task>> tasks;
  for (std::size_t i = 0; i < n; ++i) tasks.push_back(std::make_unique<Task>(p, [] {}));
  return tasks;
}

Task* take(fj::SchedulingPolicy& policy, WorkerId w) {
  if (Task* t = policy.dequeue(w)) return t;
  return policy.steal(w);
}

TEST(Policies, EmptyQueuesYieldNothing) {
  for (auto kind : fj::all_policies) {
    auto policy = fj::make_policy(kind, 4);
    EXPECT_EQ(policy->kind(), kind);
    for (std::size_t w = 0; w < 4; ++w) {
      EXPECT_EQ(policy->dequeue(WorkerId{w}), nullptr) << fj::to_string(kind);
      EXPECT_EQ(policy->steal(WorkerId{w}), nullptr) << fj::to_string(kind);
    }
  }
}

TEST(Policies, StaticPriorityAssignsRoundRobin) {
  fj::StaticPriorityPolicy policy(4);
  auto tasks = make_tasks(8);
  for (auto& t : tasks) policy.enqueue(t.get());

  // Independent simulation of a round-robin counter.
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    ASSERT_TRUE(tasks[i]->home_worker().has_value());
    EXPECT_EQ(tasks[i]->home_worker()->index, i % 4);
  }
  for (std::size_t w = 0; w < 4; ++w) {
    EXPECT_EQ(policy.dequeue(WorkerId{w}), tasks[w].get());
    EXPECT_EQ(policy.dequeue(WorkerId{w}), tasks[w + 4].get());
    EXPECT_EQ(policy.dequeue(WorkerId{w}), nullptr);
  }
}

TEST(Policies, StaticPriorityNeverSteals) {
  fj::StaticPriorityPolicy policy(2);
  auto tasks = make_tasks(100);
  for (auto& t : tasks) policy.enqueue(t.get(), WorkerId{0});
  EXPECT_EQ(policy.steal(WorkerId{1}), nullptr);
  EXPECT_EQ(policy.dequeue(WorkerId{1}), nullptr);
  std::size_t drained = 0;
  while (policy.dequeue(WorkerId{0})) ++drained;
  EXPECT_EQ(drained, 100u);
}

TEST(Policies, StaticPriorityKeepsHomeOnRequeue) {
  fj::StaticPriorityPolicy policy(3);
  auto tasks = make_tasks(2);
  policy.enqueue(tasks[0].get());
  policy.enqueue(tasks[1].get());
  ASSERT_EQ(policy.dequeue(WorkerId{1}), tasks[1].get());
  // Later enqueues (yield, resume) go back to the same worker whatever the hint.
  policy.enqueue(tasks[1].get(), WorkerId{2});
  EXPECT_EQ(policy.dequeue(WorkerId{2}), nullptr);
  EXPECT_EQ(policy.dequeue(WorkerId{1}), tasks[1].get());
}

TEST(Policies, AbpOwnerPopsLifo) {
  fj::AbpStealingPolicy policy(2);
  auto tasks = make_tasks(2);
  policy.enqueue(tasks[0].get(), WorkerId{0});
  policy.enqueue(tasks[1].get(), WorkerId{0});
  EXPECT_EQ(policy.dequeue(WorkerId{0}), tasks[1].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), tasks[0].get());
}

TEST(Policies, AbpThiefTakesBottom) {
  fj::AbpStealingPolicy policy(2);
  auto tasks = make_tasks(2);
  policy.enqueue(tasks[0].get(), WorkerId{0});
  policy.enqueue(tasks[1].get(), WorkerId{0});
  EXPECT_EQ(policy.dequeue(WorkerId{1}), nullptr);
  EXPECT_EQ(policy.steal(WorkerId{1}), tasks[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), tasks[1].get());
}

TEST(Policies, PriorityLocalDrainsHighFirst) {
  fj::PriorityLocalPolicy policy(1);
  auto low = make_tasks(2, Priority::Low);
  auto high = make_tasks(1, Priority::High);
  policy.enqueue(low[0].get());
  policy.enqueue(low[1].get());
  policy.enqueue(high[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), high[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), low[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), low[1].get());
}

TEST(Policies, LocalHasNoHighTier) {
  fj::LocalPolicy policy(1);
  auto low = make_tasks(1, Priority::Low);
  auto high = make_tasks(1, Priority::High);
  policy.enqueue(low[0].get());
  policy.enqueue(high[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), low[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), high[0].get());
}

TEST(Policies, LocalStealsFromPeers) {
  for (auto kind : {fj::PolicyKind::Local, fj::PolicyKind::PriorityLocal}) {
    auto policy = fj::make_policy(kind, 3);
    auto tasks = make_tasks(1);
    policy->enqueue(tasks[0].get(), WorkerId{2});
    EXPECT_EQ(policy->dequeue(WorkerId{0}), nullptr);
    EXPECT_EQ(policy->steal(WorkerId{0}), tasks[0].get());
  }
}

TEST(Policies, GlobalIsVisibleToEveryWorker) {
  fj::GlobalPolicy policy(4);
  auto tasks = make_tasks(4);
  for (auto& t : tasks) policy.enqueue(t.get(), WorkerId{0});
  for (std::size_t w = 0; w < 4; ++w) EXPECT_EQ(policy.dequeue(WorkerId{3 - w}), tasks[w].get());
  EXPECT_EQ(policy.steal(WorkerId{1}), nullptr);
}

TEST(Policies, HintWrapsAroundWorkerCount) {
  fj::StaticPriorityPolicy policy(3);
  auto tasks = make_tasks(1);
  policy.enqueue(tasks[0].get(), WorkerId{7});
  EXPECT_EQ(policy.dequeue(WorkerId{1}), tasks[0].get());
}

TEST(Policies, HierarchicalTraversesToRoot) {
  fj::HierarchicalPolicy policy(1);
  auto tasks = make_tasks(1);
  policy.enqueue_at_node(fj::HierarchicalPolicy::root, tasks[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), tasks[0].get());
}

TEST(Policies, HierarchicalTreeShape) {
  fj::HierarchicalPolicy policy(5);
  // Leaves are rounded up to 8, so the heap holds 15 nodes.
  EXPECT_EQ(policy.node_count(), 15u);
  EXPECT_EQ(policy.leaf_of(WorkerId{0}), 8u);
  EXPECT_EQ(policy.leaf_of(WorkerId{4}), 12u);
  auto tasks = make_tasks(1);
  EXPECT_THROW(policy.enqueue_at_node(0, tasks[0].get()), fj::Error);
  EXPECT_THROW(policy.enqueue_at_node(16, tasks[0].get()), fj::Error);
}

TEST(Policies, HierarchicalUnhintedEntersAtRoot) {
  fj::HierarchicalPolicy policy(4);
  auto tasks = make_tasks(3);
  for (auto& t : tasks) policy.enqueue(t.get());
  EXPECT_EQ(policy.queued_at(fj::HierarchicalPolicy::root), 3u);
  EXPECT_EQ(policy.dequeue(WorkerId{2}), tasks[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{3}), tasks[1].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), tasks[2].get());
}

TEST(Policies, HierarchicalWalksOnlyItsOwnPath) {
  fj::HierarchicalPolicy policy(4);
  auto tasks = make_tasks(1);
  // Node 2 is the parent of the leaves of workers 0 and 1.
  policy.enqueue_at_node(2, tasks[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{3}), nullptr);
  EXPECT_EQ(policy.dequeue(WorkerId{1}), tasks[0].get());

  policy.enqueue_at_node(2, tasks[0].get());
  EXPECT_EQ(policy.steal(WorkerId{3}), tasks[0].get());
}

TEST(Policies, PeriodicPriorityOrder) {
  fj::PeriodicPriorityPolicy policy(2);
  auto low = make_tasks(1, Priority::Low);
  auto normal = make_tasks(1, Priority::Normal);
  auto high = make_tasks(1, Priority::High);
  policy.enqueue(low[0].get(), WorkerId{0});
  policy.enqueue(normal[0].get(), WorkerId{0});
  policy.enqueue(high[0].get(), WorkerId{0});
  EXPECT_EQ(policy.dequeue(WorkerId{0}), high[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), normal[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{0}), low[0].get());
}

TEST(Policies, PeriodicPrioritySharedQueuesServeAnyWorker) {
  fj::PeriodicPriorityPolicy policy(4);
  auto low = make_tasks(1, Priority::Low);
  auto high = make_tasks(1, Priority::High);
  policy.enqueue(low[0].get(), WorkerId{0});
  policy.enqueue(high[0].get(), WorkerId{0});
  EXPECT_EQ(policy.dequeue(WorkerId{3}), high[0].get());
  EXPECT_EQ(policy.dequeue(WorkerId{2}), low[0].get());
}

TEST(Policies, PeriodicPriorityBalancesEveryPeriod) {
  fj::PeriodicPriorityPolicy policy(2);
  auto tasks = make_tasks(40);
  for (auto& t : tasks) policy.enqueue(t.get(), WorkerId{0});

  // Worker 1 idles through 99 attempts, then the 100th runs a balancing pass
  // that moves half of the 40-task imbalance over before popping one.
  for (std::uint64_t i = 1; i < fj::PeriodicPriorityPolicy::balance_period; ++i) {
    ASSERT_EQ(policy.dequeue(WorkerId{1}), nullptr);
  }
  EXPECT_EQ(policy.balance_passes(), 0u);
  EXPECT_EQ(policy.dequeue(WorkerId{1}), tasks[0].get());
  EXPECT_EQ(policy.balance_passes(), 1u);
  EXPECT_EQ(policy.queued_on(WorkerId{1}), 19u);
  EXPECT_EQ(policy.queued_on(WorkerId{0}), 20u);
}

TEST(Policies, StatsCountEveryTransfer) {
  fj::AbpStealingPolicy policy(2);
  auto tasks = make_tasks(3);
  for (auto& t : tasks) policy.enqueue(t.get(), WorkerId{0});
  policy.dequeue(WorkerId{0});
  policy.steal(WorkerId{1});
  policy.steal(WorkerId{1});
  auto s = policy.stats();
  EXPECT_EQ(s.enqueued, 3u);
  EXPECT_EQ(s.dequeued, 1u);
  EXPECT_EQ(s.stolen, 2u);
}

// Many threads enqueue, dequeue and steal at once; every task must come out
// exactly once.
TEST(Policies, ConcurrentConservation) {
  constexpr std::size_t workers = 8;
  constexpr std::size_t per_worker = 12'500;
  constexpr std::size_t total = workers * per_worker;
  for (auto kind : fj::all_policies) {
    auto policy = fj::make_policy(kind, workers);
    auto tasks = make_tasks(total);
    std::vector<std::atomic<int>> seen(total);
    std::atomic<std::size_t> taken{0};

    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t i = 0; i < per_worker; ++i) {
          std::size_t idx = w * per_worker + i;
          policy->enqueue(tasks[idx].get(), i % 3 == 0 ? std::optional<WorkerId>{} : WorkerId{w});
          if (i % 2 == 0) {
            if (Task* t = take(*policy, WorkerId{w})) {
              seen[static_cast<std::size_t>(t->id() - tasks[0]->id())].fetch_add(1);
              taken.fetch_add(1);
            }
          }
        }
        // Under StaticPriority each thread can only drain its own queue.
        while (taken.load() < total) {
          if (Task* t = take(*policy, WorkerId{w})) {
            seen[static_cast<std::size_t>(t->id() - tasks[0]->id())].fetch_add(1);
            taken.fetch_add(1);
          } else {
            std::this_thread::yield();
          }
        }
      });
    }
    for (auto& t : threads) t.join();

    EXPECT_EQ(taken.load(), total) << fj::to_string(kind);
    std::size_t wrong = 0;
    for (auto& s : seen) wrong += s.load() != 1;
    EXPECT_EQ(wrong, 0u) << fj::to_string(kind);
    auto stats = policy->stats();
    EXPECT_EQ(stats.enqueued, total);
    EXPECT_EQ(stats.dequeued + stats.stolen, total);
  }
}

}  // namespace
