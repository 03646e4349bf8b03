#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace cradar::dsp {

using cplx = std::complex<double>;

/// In-place forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N).
void fft(std::span<cplx> data);
/// In-place inverse DFT including the 1/N factor.
void ifft(std::span<cplx> data);

std::size_t next_pow2(std::size_t n);

}  // namespace cradar::dsp
