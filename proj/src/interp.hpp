#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace qftir::detail {

// Four-point Lagrange interpolation of uniformly spaced samples at fractional
// index u. Falls back to the nearest valid stencil near the ends.
inline double cubic_at(std::span<const double> y, double u) {
  const std::size_t n = y.size();
  if (n == 0) return 0.0;
  if (n == 1) return y[0];
  if (n < 4) {
    const double c = std::clamp(u, 0.0, static_cast<double>(n - 1));
    const auto i = std::min(static_cast<std::size_t>(c), n - 2);
    const double f = c - static_cast<double>(i);
    return (1.0 - f) * y[i] + f * y[i + 1];
  }
  const double c = std::clamp(u, 0.0, static_cast<double>(n - 1));
  auto i1 = static_cast<std::ptrdiff_t>(std::floor(c));
  std::ptrdiff_t i0 = i1 - 1;
  i0 = std::clamp<std::ptrdiff_t>(i0, 0, static_cast<std::ptrdiff_t>(n) - 4);
  const double t = c - static_cast<double>(i0);  // in [0, 3]
  const double y0 = y[i0], y1 = y[i0 + 1], y2 = y[i0 + 2], y3 = y[i0 + 3];
  const double l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
  const double l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
  const double l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
  const double l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
  return l0 * y0 + l1 * y1 + l2 * y2 + l3 * y3;
}

}  // namespace qftir::detail
