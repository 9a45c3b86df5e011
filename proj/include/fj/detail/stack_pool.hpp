#pragma once

#include <sys/mman.h>
#include <unistd.h>

#include <cstddef>
#include <mutex>
#include <new>
#include <optional>
#include <vector>

#include <boost/context/stack_context.hpp>

namespace fj::detail {

// Guard-paged stacks recycled across tasks. Each thread keeps a small cache;
// overflow goes to a shared list, and beyond that back to the kernel.
class StackPool {
 public:
  static StackPool& instance() {
    static StackPool* pool = new StackPool;
    return *pool;
  }

  boost::context::stack_context allocate(std::size_t usable) {
    std::size_t total = round_up(usable) + page_size();
    if (auto sc = local().take(total)) return *sc;
    {
      std::lock_guard guard(mutex_);
      for (std::size_t i = shared_.size(); i-- > 0;) {
        if (shared_[i].size == total) {
          boost::context::stack_context sc = shared_[i];
          shared_[i] = shared_.back();
          shared_.pop_back();
          return sc;
        }
      }
    }
    return map(total);
  }

  void release(boost::context::stack_context& sc) noexcept {
    if (local().give(sc)) return;
    give_shared(sc);
  }

 private:
  static constexpr std::size_t kLocalCap = 32;
  static constexpr std::size_t kSharedCap = 1024;

  struct LocalCache {
    std::vector<boost::context::stack_context> stacks;

    LocalCache() { stacks.reserve(kLocalCap); }

    std::optional<boost::context::stack_context> take(std::size_t total) {
      for (std::size_t i = stacks.size(); i-- > 0;) {
        if (stacks[i].size == total) {
          auto sc = stacks[i];
          stacks[i] = stacks.back();
          stacks.pop_back();
          return sc;
        }
      }
      return std::nullopt;
    }

    bool give(const boost::context::stack_context& sc) {
      if (stacks.size() >= kLocalCap) return false;
      stacks.push_back(sc);
      return true;
    }

    ~LocalCache() {
      for (auto& sc : stacks) StackPool::instance().give_shared(sc);
    }
  };

  static LocalCache& local() {
    thread_local LocalCache cache;
    return cache;
  }

  static std::size_t page_size() noexcept {
    static const std::size_t page = static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
    return page;
  }

  static std::size_t round_up(std::size_t n) noexcept {
    std::size_t page = page_size();
    return (n + page - 1) / page * page;
  }

  static boost::context::stack_context map(std::size_t total) {
    void* base = ::mmap(nullptr, total, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_STACK, -1, 0);
    if (base == MAP_FAILED) throw std::bad_alloc();
    ::mprotect(base, page_size(), PROT_NONE);
    boost::context::stack_context sc;
    sc.size = total;
    sc.sp = static_cast<char*>(base) + total;
    return sc;
  }

  static void unmap(const boost::context::stack_context& sc) noexcept {
    ::munmap(static_cast<char*>(sc.sp) - sc.size, sc.size);
  }

  void give_shared(const boost::context::stack_context& sc) noexcept {
    {
      std::lock_guard guard(mutex_);
      if (shared_.size() < kSharedCap) {
        shared_.push_back(sc);
        return;
      }
    }
    unmap(sc);
  }

  StackPool() { shared_.reserve(kSharedCap); }

  std::mutex mutex_;
  std::vector<boost::context::stack_context> shared_;
};

struct PooledStackAllocator {
  std::size_t usable;

  boost::context::stack_context allocate() { return StackPool::instance().allocate(usable); }
  void deallocate(boost::context::stack_context& sc) noexcept { StackPool::instance().release(sc); }
};

}  // namespace fj::detail
