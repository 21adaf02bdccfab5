#pragma once

#include <cmath>
#include <span>

namespace facetflow::kernels::detail {

// Cubic Hermite interpolation of tabulated (g, g') on lo + k step, k < n,
// continued linearly past both ends.
inline double hermite_eval(double p, double lo, double step, std::span<const double> g,
                           std::span<const double> dg) {
  const std::size_t n = g.size();
  const double s = (p - lo) / step;
  if (s <= 0.0) return g[0] + dg[0] * (p - lo);
  if (s >= double(n - 1)) return g[n - 1] + dg[n - 1] * (p - lo - (n - 1) * step);
  std::size_t k = std::size_t(s);
  if (k >= n - 1) k = n - 2;
  const double t = s - double(k);
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
  const double h10 = t3 - 2.0 * t2 + t;
  const double h01 = -2.0 * t3 + 3.0 * t2;
  const double h11 = t3 - t2;
  return h00 * g[k] + h10 * step * dg[k] + h01 * g[k + 1] + h11 * step * dg[k + 1];
}

}  // namespace facetflow::kernels::detail
