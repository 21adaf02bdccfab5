#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "edt_line.hpp"
#include "facetflow/kernels.hpp"
#include "hermite_eval.hpp"

namespace facetflow::kernels::omp {

void gradient(Shape s, std::span<const double> u, double inv_h, std::span<double> gx,
              std::span<double> gy) {
  const int n = s.n;
  if (s.dim == 1) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      gx[i] = (u[i + 1 == n ? 0 : i + 1] - u[i]) * inv_h;
      gy[i] = 0.0;
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    const double* row = u.data() + std::size_t(j) * n;
    const double* up = u.data() + std::size_t(j + 1 == n ? 0 : j + 1) * n;
    double* ox = gx.data() + std::size_t(j) * n;
    double* oy = gy.data() + std::size_t(j) * n;
    for (int i = 0; i + 1 < n; ++i) {
      ox[i] = (row[i + 1] - row[i]) * inv_h;
      oy[i] = (up[i] - row[i]) * inv_h;
    }
    ox[n - 1] = (row[0] - row[n - 1]) * inv_h;
    oy[n - 1] = (up[n - 1] - row[n - 1]) * inv_h;
  }
}

void divergence(Shape s, std::span<const double> zx, std::span<const double> zy, double inv_h,
                std::span<double> out) {
  const int n = s.n;
  if (s.dim == 1) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) out[i] = (zx[i] - zx[i == 0 ? n - 1 : i - 1]) * inv_h;
    return;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    const double* xr = zx.data() + std::size_t(j) * n;
    const double* yr = zy.data() + std::size_t(j) * n;
    const double* yd = zy.data() + std::size_t(j == 0 ? n - 1 : j - 1) * n;
    double* o = out.data() + std::size_t(j) * n;
    o[0] = (xr[0] - xr[n - 1]) * inv_h + (yr[0] - yd[0]) * inv_h;
    for (int i = 1; i < n; ++i) o[i] = (xr[i] - xr[i - 1]) * inv_h + (yr[i] - yd[i]) * inv_h;
  }
}

void ball_extremum(Shape s, std::span<const double> u, std::span<const std::array<int, 2>> offsets,
                   bool take_max, std::span<double> out) {
  const int n = s.n;
  const int rows = s.dim == 1 ? 1 : n;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < n; ++i) {
      double best = take_max ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
      for (const auto& o : offsets) {
        int ii = (i + o[0]) % n;
        if (ii < 0) ii += n;
        int jj = 0;
        if (s.dim == 2) {
          jj = (j + o[1]) % n;
          if (jj < 0) jj += n;
        }
        const double v = u[std::size_t(jj) * n + ii];
        best = take_max ? std::max(best, v) : std::min(best, v);
      }
      out[std::size_t(j) * n + i] = best;
    }
  }
}

void squared_edt(Shape s, std::span<const std::uint8_t> mask, std::span<double> out) {
  const int n = s.n;
  const int rows = s.dim == 1 ? 1 : n;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < rows; ++j) {
    detail::row_distance(mask.subspan(std::size_t(j) * n, n),
                         out.subspan(std::size_t(j) * n, n));
  }
  if (s.dim == 1) return;
#pragma omp parallel
  {
    std::vector<double> col(n), res(n), work(3 * std::size_t(n));
    std::vector<int> v(3 * std::size_t(n));
    std::vector<double> z(3 * std::size_t(n) + 1);
#pragma omp for schedule(static)
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) col[j] = out[std::size_t(j) * n + i];
      detail::periodic_envelope(col, res, work, v, z);
      for (int j = 0; j < n; ++j) out[std::size_t(j) * n + i] = res[j];
    }
  }
}

double sum(std::span<const double> v) {
  const std::size_t blocks = (v.size() + kSumBlock - 1) / kSumBlock;
  std::vector<double> parts(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t e = std::min(v.size(), (b + 1) * kSumBlock);
    double part = 0.0;
    for (std::size_t k = b * kSumBlock; k < e; ++k) part += v[k];
    parts[b] = part;
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t blocks = (a.size() + kSumBlock - 1) / kSumBlock;
  std::vector<double> parts(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t e = std::min(a.size(), (blk + 1) * kSumBlock);
    double part = 0.0;
    for (std::size_t k = blk * kSumBlock; k < e; ++k) part += a[k] * b[k];
    parts[blk] = part;
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

void prox_step(std::span<double> v, std::span<double> vbar, std::span<const double> divz,
               std::span<const double> psi, double tau, double inv_a, double theta) {
  const double scale = 1.0 / (1.0 + tau * inv_a);
  const std::ptrdiff_t size = std::ptrdiff_t(v.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < size; ++k) {
    const double old = v[k];
    const double nv = (old + tau * (divz[k] + psi[k] * inv_a)) * scale;
    v[k] = nv;
    vbar[k] = nv + theta * (nv - old);
  }
}

void hermite_flux(std::span<double> p, double lo, double step, std::span<const double> g,
                  std::span<const double> dg) {
  const std::ptrdiff_t size = std::ptrdiff_t(p.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < size; ++k) p[k] = detail::hermite_eval(p[k], lo, step, g, dg);
}

}  // namespace facetflow::kernels::omp
