#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "edt_line.hpp"
#include "facetflow/kernels.hpp"
#include "hermite_eval.hpp"

namespace facetflow::kernels::serial {

void gradient(Shape s, std::span<const double> u, double inv_h, std::span<double> gx,
              std::span<double> gy) {
  const int n = s.n;
  if (s.dim == 1) {
    for (int i = 0; i < n; ++i) {
      gx[i] = (u[(i + 1) % n] - u[i]) * inv_h;
      gy[i] = 0.0;
    }
    return;
  }
  for (int j = 0; j < n; ++j) {
    const int jp = (j + 1) % n;
    for (int i = 0; i < n; ++i) {
      const int ip = (i + 1) % n;
      const std::size_t k = std::size_t(j) * n + i;
      gx[k] = (u[std::size_t(j) * n + ip] - u[k]) * inv_h;
      gy[k] = (u[std::size_t(jp) * n + i] - u[k]) * inv_h;
    }
  }
}

void divergence(Shape s, std::span<const double> zx, std::span<const double> zy, double inv_h,
                std::span<double> out) {
  const int n = s.n;
  if (s.dim == 1) {
    for (int i = 0; i < n; ++i) out[i] = (zx[i] - zx[(i + n - 1) % n]) * inv_h;
    return;
  }
  for (int j = 0; j < n; ++j) {
    const int jm = (j + n - 1) % n;
    for (int i = 0; i < n; ++i) {
      const int im = (i + n - 1) % n;
      const std::size_t k = std::size_t(j) * n + i;
      out[k] = (zx[k] - zx[std::size_t(j) * n + im]) * inv_h +
               (zy[k] - zy[std::size_t(jm) * n + i]) * inv_h;
    }
  }
}

void ball_extremum(Shape s, std::span<const double> u, std::span<const std::array<int, 2>> offsets,
                   bool take_max, std::span<double> out) {
  const int n = s.n;
  const int rows = s.dim == 1 ? 1 : n;
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < n; ++i) {
      double best = take_max ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
      for (const auto& o : offsets) {
        const int ii = ((i + o[0]) % n + n) % n;
        const int jj = s.dim == 1 ? 0 : ((j + o[1]) % n + n) % n;
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
  std::vector<double> line(n), work(3 * std::size_t(n));
  std::vector<int> v(3 * std::size_t(n));
  std::vector<double> z(3 * std::size_t(n) + 1);
  for (int j = 0; j < rows; ++j) {
    detail::row_distance(mask.subspan(std::size_t(j) * n, n), line);
    for (int i = 0; i < n; ++i) out[std::size_t(j) * n + i] = line[i];
  }
  if (s.dim == 1) return;
  std::vector<double> col(n), res(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) col[j] = out[std::size_t(j) * n + i];
    detail::periodic_envelope(col, res, work, v, z);
    for (int j = 0; j < n; ++j) out[std::size_t(j) * n + i] = res[j];
  }
}

double sum(std::span<const double> v) {
  double total = 0.0;
  for (std::size_t b = 0; b < v.size(); b += kSumBlock) {
    const std::size_t e = std::min(v.size(), b + kSumBlock);
    double part = 0.0;
    for (std::size_t k = b; k < e; ++k) part += v[k];
    total += part;
  }
  return total;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t blk = 0; blk < a.size(); blk += kSumBlock) {
    const std::size_t e = std::min(a.size(), blk + kSumBlock);
    double part = 0.0;
    for (std::size_t k = blk; k < e; ++k) part += a[k] * b[k];
    total += part;
  }
  return total;
}

void prox_step(std::span<double> v, std::span<double> vbar, std::span<const double> divz,
               std::span<const double> psi, double tau, double inv_a, double theta) {
  const double scale = 1.0 / (1.0 + tau * inv_a);
  const std::ptrdiff_t size = std::ptrdiff_t(v.size());
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
  for (std::ptrdiff_t k = 0; k < size; ++k) p[k] = detail::hermite_eval(p[k], lo, step, g, dg);
}

}  // namespace facetflow::kernels::serial
