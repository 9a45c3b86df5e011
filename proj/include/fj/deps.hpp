#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "fj/runtime.hpp"
#include "fj/task.hpp"

namespace fj {

enum class DepMode : std::uint8_t { In, Out, InOut };

/// One dependence clause: an opaque address-sized key and its access mode.
struct Depend {
  std::uintptr_t key;
  DepMode mode;

  template <class T>
  static Depend in(const T* p) noexcept { return {reinterpret_cast<std::uintptr_t>(p), DepMode::In}; }
  template <class T>
  static Depend out(const T* p) noexcept { return {reinterpret_cast<std::uintptr_t>(p), DepMode::Out}; }
  template <class T>
  static Depend inout(const T* p) noexcept { return {reinterpret_cast<std::uintptr_t>(p), DepMode::InOut}; }
};

namespace detail {

// Graph vertex for one task with dependences. The task is submitted when
// `pending` reaches zero; it starts at one so registration can finish first.
struct DepNode {
  TaskId id = no_task;
  std::function<void()> on_ready;

  std::mutex mutex;
  bool finished = false;
  std::vector<std::shared_ptr<DepNode>> successors;
  std::atomic<std::size_t> pending{1};

  // False when this node already finished, so no edge is needed.
  bool add_successor(const std::shared_ptr<DepNode>& next) {
    std::lock_guard guard(mutex);
    if (finished) return false;
    successors.push_back(next);
    return true;
  }

  void release() {
    if (pending.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      auto ready = std::move(on_ready);
      ready();
    }
  }

  void complete() {
    std::vector<std::shared_ptr<DepNode>> next;
    {
      std::lock_guard guard(mutex);
      finished = true;
      next.swap(successors);
    }
    for (auto& n : next) n->release();
  }
};

}  // namespace detail

/// Last writer and readers-since-write per key, for sibling tasks created
/// by one parent.
class DependencyTable {
 public:
  /// Records `node`'s accesses and returns its predecessors (deduplicated,
  /// never `node` itself).
  std::vector<std::shared_ptr<detail::DepNode>> add(const std::shared_ptr<detail::DepNode>& node,
                                                     const std::vector<Depend>& deps) {
    std::vector<std::shared_ptr<detail::DepNode>> preds;
    auto link = [&](const std::shared_ptr<detail::DepNode>& p) {
      if (!p || p == node) return;
      for (auto& q : preds) {
        if (q == p) return;
      }
      preds.push_back(p);
    };

    std::lock_guard guard(mutex_);
    for (const Depend& d : deps) {
      Entry& e = entries_[d.key];
      if (d.mode == DepMode::In) {
        link(e.last_writer);
        bool listed = false;
        for (auto& r : e.readers) listed = listed || r == node;
        if (!listed) e.readers.push_back(node);
      } else {
        link(e.last_writer);
        for (auto& r : e.readers) link(r);
        e.readers.clear();
        e.last_writer = node;
      }
    }
    return preds;
  }

  std::size_t keys() {
    std::lock_guard guard(mutex_);
    return entries_.size();
  }

 private:
  struct Entry {
    std::shared_ptr<detail::DepNode> last_writer;
    std::vector<std::shared_ptr<detail::DepNode>> readers;
  };

  std::mutex mutex_;
  std::unordered_map<std::uintptr_t, Entry> entries_;
};

}  // namespace fj
