#pragma once

// Dense double-precision inner loops used by clustering, spectral scoring and
// embedding similarity. Each kernel has a portable scalar reference and, on
// x86-64, an AVX2+FMA variant picked at first use from the running CPU.
// Setting FDI_SIMD=scalar in the environment pins the scalar path.

#include <cassert>
#include <cstddef>
#include <span>

namespace fdi::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

bool available(Backend backend) noexcept;

/// Throws fdi::Error when the backend is not compiled in or not supported by the CPU.
const KernelTable& table(Backend backend);

const KernelTable& active() noexcept;
Backend active_backend() noexcept;

/// Overrides dispatch for the whole process. Intended for equivalence tests.
void force_backend(Backend backend);

/// Restores CPU-detected dispatch (still honouring FDI_SIMD).
void reset_backend() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double norm(std::span<const double> a);

/// Scales `a` to unit L2 norm in place; zero vectors stay zero.
void normalize(std::span<double> a);

}  // namespace fdi::kernels
