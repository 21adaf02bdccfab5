#pragma once

// One-dimensional passes of the exact periodic squared Euclidean distance
// transform (lower envelope of parabolas, Felzenszwalb-Huttenlocher) shared
// by the serial and OpenMP kernels.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace facetflow::kernels::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Squared periodic distance along a line to the nearest set entry.
inline void row_distance(std::span<const std::uint8_t> mask, std::span<double> out) {
  const int n = int(mask.size());
  double d = kInf;
  for (int i = 0; i < 2 * n; ++i) {
    const int k = i % n;
    d = mask[k] ? 0.0 : d + 1.0;
    if (i >= n || d == 0.0) out[k] = d;
  }
  d = kInf;
  for (int i = 2 * n - 1; i >= 0; --i) {
    const int k = i % n;
    d = mask[k] ? 0.0 : d + 1.0;
    if (d < out[k]) out[k] = d;
  }
  for (int k = 0; k < n; ++k) out[k] = out[k] * out[k];
}

/// out[q] = min_p f[p] + dist_periodic(p, q)^2 for q in [0, n).
inline void periodic_envelope(std::span<const double> f, std::span<double> out,
                              std::vector<double>& work, std::vector<int>& v,
                              std::vector<double>& z) {
  const int n = int(f.size());
  const int m = 3 * n;
  for (int k = 0; k < m; ++k) work[k] = f[k % n];
  int top = -1;
  for (int q = 0; q < m; ++q) {
    const double fq = work[q];
    if (fq == kInf) continue;
    if (top < 0) {
      top = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[top];
      s = ((fq + double(q) * q) - (work[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[top]) {
        --top;
      } else {
        break;
      }
    }
    ++top;
    v[top] = q;
    z[top] = s;
    z[top + 1] = kInf;
  }
  if (top < 0) {
    for (int q = 0; q < n; ++q) out[q] = kInf;
    return;
  }
  int k = 0;
  for (int q = n; q < 2 * n; ++q) {
    while (z[k + 1] < q) ++k;
    const double d = double(q - v[k]);
    out[q - n] = d * d + work[v[k]];
  }
}

}  // namespace facetflow::kernels::detail
