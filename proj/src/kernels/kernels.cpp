#include "fdi/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include "fdi/error.hpp"
#include "kernels_impl.hpp"

namespace fdi::kernels {

namespace {

constexpr KernelTable kScalar{"scalar", &detail::dot_scalar, &detail::squared_distance_scalar,
                              &detail::axpy_scalar};

#if defined(FDI_HAVE_AVX2_KERNELS)
constexpr KernelTable kAvx2{"avx2", &detail::dot_avx2, &detail::squared_distance_avx2,
                            &detail::axpy_avx2};
#endif

bool cpu_has_avx2() noexcept {
#if defined(FDI_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() noexcept {
  if (const char* env = std::getenv("FDI_SIMD"); env != nullptr && std::string_view(env) == "scalar") {
    return Backend::scalar;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable* resolve(Backend b) noexcept {
#if defined(FDI_HAVE_AVX2_KERNELS)
  if (b == Backend::avx2) return &kAvx2;
#endif
  (void)b;
  return &kScalar;
}

}  // namespace

bool available(Backend backend) noexcept {
  return backend == Backend::scalar || cpu_has_avx2();
}

const KernelTable& table(Backend backend) {
  if (!available(backend)) {
    throw Error(ErrorKind::invalid_argument, "kernel backend not available on this CPU");
  }
  return *resolve(backend);
}

const KernelTable& active() noexcept {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const Backend b = detect();
    g_backend.store(b, std::memory_order_relaxed);
    t = resolve(b);
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

Backend active_backend() noexcept {
  (void)active();
  return g_backend.load(std::memory_order_relaxed);
}

void force_backend(Backend backend) {
  const KernelTable& t = table(backend);
  g_backend.store(backend, std::memory_order_relaxed);
  g_active.store(&t, std::memory_order_release);
}

void reset_backend() noexcept { g_active.store(nullptr, std::memory_order_release); }

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void normalize(std::span<double> a) {
  const double n = norm(a);
  if (n == 0.0) return;
  const double inv = 1.0 / n;
  for (double& x : a) x *= inv;
}

}  // namespace fdi::kernels
