#pragma once

// Data-parallel inner loops shared by the dense/LSTM layers and the radar
// pipeline. Each kernel has a scalar reference implementation and an AVX2
// variant; the active table is chosen once at startup from the CPU flags
// (override with CRADAR_SIMD=scalar|avx2).

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace cradar::simd {

using cplx = std::complex<double>;

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = x * conj(y)
  void (*cmul_conj)(const cplx* x, const cplx* y, cplx* out, std::size_t n);
  // y += alpha * x
  void (*caxpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
  // out = |x|^2
  void (*abs2)(const cplx* x, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();
// Falls back to the scalar table when the AVX2 variant was not compiled in.
const KernelTable& avx2_kernels();

bool cpu_supports(Backend backend);
Backend active_backend();
/// Returns false (and leaves the selection unchanged) if the CPU lacks support.
bool select_backend(Backend backend);
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void cmul_conj(std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out) {
  active().cmul_conj(x.data(), y.data(), out.data(), x.size());
}

inline void caxpy(cplx alpha, std::span<const cplx> x, std::span<cplx> y) {
  active().caxpy(alpha, x.data(), y.data(), x.size());
}

inline void abs2(std::span<const cplx> x, std::span<double> out) {
  active().abs2(x.data(), out.data(), x.size());
}

}  // namespace cradar::simd
