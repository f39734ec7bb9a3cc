#pragma once

// Thin FFTW wrapper. Plan creation is serialized; execution is reentrant.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qftir::detail {

/// Unnormalized forward transform of a real sequence, n/2+1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> in);

/// Unnormalized inverse of rfft for a length-n real output.
std::vector<double> irfft(std::span<const std::complex<double>> in, std::size_t n);

std::size_t next_pow2(std::size_t n);

}  // namespace qftir::detail
