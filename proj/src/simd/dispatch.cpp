#include <atomic>
#include <cstdlib>
#include <string_view>

#include "cradar/simd.hpp"

namespace cradar::simd {

bool avx2_compiled();

namespace {

Backend detect() {
  if (const char* forced = std::getenv("CRADAR_SIMD")) {
    const std::string_view v(forced);
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2" && cpu_supports(Backend::Avx2)) return Backend::Avx2;
  }
  return cpu_supports(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& selected() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool cpu_supports(Backend backend) {
  if (backend == Backend::Scalar) return true;
#if defined(__x86_64__) || defined(__i386__)
  return avx2_compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return selected().load(std::memory_order_relaxed); }

bool select_backend(Backend backend) {
  if (!cpu_supports(backend)) return false;
  selected().store(backend, std::memory_order_relaxed);
  return true;
}

const KernelTable& active() {
  return active_backend() == Backend::Avx2 ? avx2_kernels() : scalar_kernels();
}

}  // namespace cradar::simd
