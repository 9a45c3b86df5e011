#include <memory>

#include <gtest/gtest.h>

#include "fj/deps.hpp"

namespace {

using Node = std::shared_ptr<fj::detail::DepNode>;

Node node() { return std::make_shared<fj::detail::DepNode>(); }

bool has(const std::vector<Node>& preds, const Node& n) {
  for (auto& p : preds) {
    if (p == n) return true;
  }
  return false;
}

TEST(DependencyTable, ReadersDependOnLastWriter) {
  fj::DependencyTable table;
  int x = 0;
  auto w = node();
  auto r1 = node();
  auto r2 = node();
  EXPECT_TRUE(table.add(w, {fj::Depend::out(&x)}).empty());
  auto p1 = table.add(r1, {fj::Depend::in(&x)});
  auto p2 = table.add(r2, {fj::Depend::in(&x)});
  EXPECT_EQ(p1.size(), 1u);
  EXPECT_TRUE(has(p1, w));
  EXPECT_EQ(p2.size(), 1u);
  EXPECT_TRUE(has(p2, w));
}

TEST(DependencyTable, WriterDependsOnReadersAndWriter) {
  fj::DependencyTable table;
  int x = 0;
  auto w1 = node();
  auto r1 = node();
  auto r2 = node();
  auto w2 = node();
  auto r3 = node();
  table.add(w1, {fj::Depend::out(&x)});
  table.add(r1, {fj::Depend::in(&x)});
  table.add(r2, {fj::Depend::in(&x)});
  auto p = table.add(w2, {fj::Depend::inout(&x)});
  EXPECT_EQ(p.size(), 3u);
  EXPECT_TRUE(has(p, w1));
  EXPECT_TRUE(has(p, r1));
  EXPECT_TRUE(has(p, r2));
  // Readers since w2 start afresh.
  auto p3 = table.add(r3, {fj::Depend::in(&x)});
  EXPECT_EQ(p3.size(), 1u);
  EXPECT_TRUE(has(p3, w2));
}

TEST(DependencyTable, IndependentKeysAndSelfEdges) {
  fj::DependencyTable table;
  int x = 0;
  int y = 0;
  auto a = node();
  auto b = node();
  table.add(a, {fj::Depend::out(&x)});
  EXPECT_TRUE(table.add(b, {fj::Depend::out(&y)}).empty());
  // One task touching a key twice does not depend on itself.
  auto c = node();
  auto pc = table.add(c, {fj::Depend::in(&x), fj::Depend::out(&x), fj::Depend::inout(&x)});
  EXPECT_EQ(pc.size(), 1u);
  EXPECT_TRUE(has(pc, a));
  EXPECT_EQ(table.keys(), 2u);
}

TEST(DepNode, ReleasesSuccessorsOnCompletion) {
  auto a = node();
  auto b = node();
  bool ran = false;
  b->on_ready = [&] { ran = true; };
  b->pending.fetch_add(1);
  ASSERT_TRUE(a->add_successor(b));
  b->release();
  EXPECT_FALSE(ran);
  a->complete();
  EXPECT_TRUE(ran);
  EXPECT_FALSE(a->add_successor(node()));
}

}  // namespace
