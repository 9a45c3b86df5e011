#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "fj/error.hpp"

namespace fj::bench {

enum class KernelKind : std::uint8_t { DVecDVecAdd, Daxpy, DMatDMatAdd, DMatDMatMult };

inline constexpr std::array<KernelKind, 4> all_kernels{KernelKind::DVecDVecAdd, KernelKind::Daxpy,
                                                       KernelKind::DMatDMatAdd, KernelKind::DMatDMatMult};

constexpr std::string_view to_string(KernelKind k) noexcept {
  switch (k) {
    case KernelKind::DVecDVecAdd: return "dvecdvecadd";
    case KernelKind::Daxpy: return "daxpy";
    case KernelKind::DMatDMatAdd: return "dmatdmatadd";
    case KernelKind::DMatDMatMult: return "dmatdmatmult";
  }
  return "unknown";
}

inline KernelKind parse_kernel(std::string_view name) {
  for (KernelKind k : all_kernels) {
    if (to_string(k) == name) return k;
  }
  throw Error(Errc::invalid_argument, "unknown kernel '" + std::string(name) + "'");
}

constexpr bool is_matrix(KernelKind k) noexcept {
  return k == KernelKind::DMatDMatAdd || k == KernelKind::DMatDMatMult;
}

/// Element count from which a kernel runs in parallel.
constexpr std::uint64_t threshold(KernelKind k) noexcept {
  switch (k) {
    case KernelKind::DVecDVecAdd: return 38'000;
    case KernelKind::Daxpy: return 38'000;
    case KernelKind::DMatDMatAdd: return 36'100;
    case KernelKind::DMatDMatMult: return 3'025;
  }
  return 0;
}

/// Elements in the output: n for vectors, n*n for n-by-n matrices.
inline std::uint64_t element_count(KernelKind k, std::uint64_t n) {
  if (n == 0) throw Error(Errc::invalid_argument, "kernel size must be at least 1");
  if (!is_matrix(k)) return n;
  // Three n*n operands of doubles must stay addressable.
  constexpr std::uint64_t limit = std::numeric_limits<std::size_t>::max() / (3 * sizeof(double));
  if (n > limit / n) throw Error(Errc::invalid_argument, "matrix dimension " + std::to_string(n) + " overflows");
  return n * n;
}

/// Floating-point operations of one kernel invocation.
constexpr double flops(KernelKind k, std::uint64_t n) noexcept {
  const auto x = static_cast<double>(n);
  switch (k) {
    case KernelKind::DVecDVecAdd: return x;
    case KernelKind::Daxpy: return 2.0 * x;
    case KernelKind::DMatDMatAdd: return x * x;
    case KernelKind::DMatDMatMult: return 2.0 * x * x * x;
  }
  return 0.0;
}

/// Deterministic operands.
inline double input_a(std::uint64_t i) noexcept { return static_cast<double>(i % 7 + 1); }
inline double input_b(std::uint64_t i) noexcept { return static_cast<double>(i % 5 + 1); }

/// FNV-1a over the bytes of `values`.
inline std::uint64_t checksum(const std::vector<double>& values) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

/// Operands and output of one kernel at one size.
struct Workload {
  KernelKind kind;
  std::uint64_t n;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;

  Workload(KernelKind k, std::uint64_t size) : kind(k), n(size) {
    const std::uint64_t count = element_count(k, size);
    a.resize(count);
    b.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      a[i] = input_a(i);
      b[i] = input_b(i);
    }
    if (k != KernelKind::Daxpy) c.assign(count, 0.0);
  }

  // Daxpy updates b in place; re-running it must start from the same b.
  void reset() {
    if (kind != KernelKind::Daxpy) return;
    for (std::uint64_t i = 0; i < b.size(); ++i) b[i] = input_b(i);
  }

  const std::vector<double>& output() const noexcept { return kind == KernelKind::Daxpy ? b : c; }

  /// Units the kernel is split over: elements, or matrix rows for a product.
  std::uint64_t work_units() const noexcept { return kind == KernelKind::DMatDMatMult ? n : a.size(); }

  /// Computes work units [begin, end).
  void compute(std::uint64_t begin, std::uint64_t end) noexcept {
    switch (kind) {
      case KernelKind::DVecDVecAdd:
      case KernelKind::DMatDMatAdd:
        for (std::uint64_t i = begin; i < end; ++i) c[i] = a[i] + b[i];
        break;
      case KernelKind::Daxpy:
        for (std::uint64_t i = begin; i < end; ++i) b[i] = b[i] + 3.0 * a[i];
        break;
      case KernelKind::DMatDMatMult: {
        const double* A = a.data();
        const double* B = b.data();
        double* C = c.data();
        for (std::uint64_t i = begin; i < end; ++i) {
          double* row = C + i * n;
          for (std::uint64_t j = 0; j < n; ++j) row[j] = 0.0;
          for (std::uint64_t k = 0; k < n; ++k) {
            const double aik = A[i * n + k];
            const double* brow = B + k * n;
            for (std::uint64_t j = 0; j < n; ++j) row[j] += aik * brow[j];
          }
        }
        break;
      }
    }
  }
};

}  // namespace fj::bench
