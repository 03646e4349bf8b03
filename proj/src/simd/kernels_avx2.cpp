#include "cradar/simd.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#define CRADAR_HAVE_AVX2 1
#include <immintrin.h>
#else
#define CRADAR_HAVE_AVX2 0
#endif

namespace cradar::simd {

#if CRADAR_HAVE_AVX2
namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Two complex values per register, interleaved (re, im, re, im).
void cmul_conj_avx2(const cplx* x, const cplx* y, cplx* out, std::size_t n) {
  auto* xp = reinterpret_cast<const double*>(x);
  auto* yp = reinterpret_cast<const double*>(y);
  auto* op = reinterpret_cast<double*>(out);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vx = _mm256_loadu_pd(xp + 2 * i);
    const __m256d vy = _mm256_loadu_pd(yp + 2 * i);
    const __m256d yr = _mm256_movedup_pd(vy);
    const __m256d yi = _mm256_permute_pd(vy, 0xF);
    const __m256d xs = _mm256_permute_pd(vx, 0x5);
    // (xr yr + xi yi, xi yr - xr yi)
    _mm256_storeu_pd(op + 2 * i, _mm256_fmsubadd_pd(vx, yr, _mm256_mul_pd(xs, yi)));
  }
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    out[i] = cplx(xr * yr + xi * yi, xi * yr - xr * yi);
  }
}

void caxpy_avx2(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
  auto* xp = reinterpret_cast<const double*>(x);
  auto* yp = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(alpha.real());
  const __m256d ai = _mm256_set1_pd(alpha.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vx = _mm256_loadu_pd(xp + 2 * i);
    const __m256d xs = _mm256_permute_pd(vx, 0x5);
    const __m256d prod = _mm256_fmaddsub_pd(vx, ar, _mm256_mul_pd(xs, ai));
    _mm256_storeu_pd(yp + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yp + 2 * i), prod));
  }
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cplx(alpha.real() * xr - alpha.imag() * xi, alpha.real() * xi + alpha.imag() * xr);
  }
}

void abs2_avx2(const cplx* x, double* out, std::size_t n) {
  auto* xp = reinterpret_cast<const double*>(x);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(xp + 2 * i);
    const __m256d b = _mm256_loadu_pd(xp + 2 * i + 4);
    const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(h, 0xD8));
  }
  for (; i < n; ++i) out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{"avx2", dot_avx2, axpy_avx2, cmul_conj_avx2, caxpy_avx2, abs2_avx2};
  return table;
}

bool avx2_compiled() { return true; }

#else

const KernelTable& avx2_kernels() { return scalar_kernels(); }

bool avx2_compiled() { return false; }

#endif

}  // namespace cradar::simd
