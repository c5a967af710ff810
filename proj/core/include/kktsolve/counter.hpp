#pragma once

#include <atomic>
#include <cstdint>

namespace kktsolve {

/// Monotone counter of triangular-solve units. Atomic so that concurrent
/// solves on shared factors stay exact; copying snapshots the value.
class SolveCounter {
 public:
  SolveCounter() = default;
  SolveCounter(const SolveCounter& other) noexcept : value_(other.load()) {}
  SolveCounter& operator=(const SolveCounter& other) noexcept {
    value_.store(other.load(), std::memory_order_relaxed);
    return *this;
  }

  void increment() const noexcept { value_.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t load() const noexcept { return value_.load(std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> value_{0};
};

}  // namespace kktsolve
