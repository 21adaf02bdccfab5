#include "facetflow/torus_grid.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "facetflow/kernels.hpp"

namespace facetflow {

namespace {

kernels::Shape shape_of(const Grid& g) { return {g.dim(), g.resolution()}; }

}  // namespace

std::array<double, 2> eigenvalues(const Sym2& m) {
  const double mid = 0.5 * (m.xx + m.yy);
  const double rad = std::hypot(0.5 * (m.xx - m.yy), m.xy);
  return {mid - rad, mid + rad};
}

Sym2 inverse(const Sym2& m) {
  const double d = m.det();
  if (!(std::abs(d) > 0.0) || !std::isfinite(d)) throw NumericalFailure("singular 2x2 matrix");
  return {m.yy / d, -m.xy / d, m.xx / d};
}

Grid::Grid(int dim, int resolution) : dim_(dim), n_(resolution) {
  if (dim != 1 && dim != 2) throw DomainError("grid dimension must be 1 or 2");
  if (resolution < 8) throw DomainError("grid resolution must be at least 8");
}

GridFunction::GridFunction(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw GridMismatch("value count does not match grid");
}

double GridFunction::max() const { return *std::max_element(values_.begin(), values_.end()); }
double GridFunction::min() const { return *std::min_element(values_.begin(), values_.end()); }
double GridFunction::mean() const { return kernels::omp::sum(values_) / double(values_.size()); }

double GridFunction::l2_norm() const {
  const double h = grid_.spacing();
  const double w = grid_.dim() == 1 ? h : h * h;
  return std::sqrt(w * kernels::omp::dot(values_, values_));
}

bool GridFunction::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  require_same_grid(grid_, o.grid_, "GridFunction +=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}
GridFunction& GridFunction::operator-=(const GridFunction& o) {
  require_same_grid(grid_, o.grid_, "GridFunction -=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}
GridFunction& GridFunction::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}
GridFunction& GridFunction::operator+=(double c) {
  for (double& v : values_) v += c;
  return *this;
}

Vec2 torus_difference(Vec2 x, Vec2 y, int dim) {
  auto wrap = [](double d) { return d - std::nearbyint(d); };
  return {wrap(x.x - y.x), dim == 1 ? 0.0 : wrap(x.y - y.y)};
}

double torus_distance(Vec2 x, Vec2 y, int dim) { return norm(torus_difference(x, y, dim)); }

GridVectorField gradient_fd(const GridFunction& u) {
  GridVectorField g(u.grid());
  kernels::omp::gradient(shape_of(u.grid()), u.values(), 1.0 / u.grid().spacing(), g.xs(), g.ys());
  return g;
}

GridFunction divergence_fd(const GridVectorField& z) {
  GridFunction out(z.grid());
  kernels::omp::divergence(shape_of(z.grid()), z.xs(), z.ys(), 1.0 / z.grid().spacing(),
                           out.values());
  return out;
}

double inner(const GridFunction& a, const GridFunction& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  return kernels::omp::dot(a.values(), b.values());
}

double inner(const GridVectorField& a, const GridVectorField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  return kernels::omp::dot(a.xs(), b.xs()) + kernels::omp::dot(a.ys(), b.ys());
}

std::vector<std::array<int, 2>> ball_offsets(const Grid& grid, double eta) {
  if (!(eta >= 0.0)) throw DomainError("ball radius must be nonnegative");
  const double r = eta / grid.spacing();
  const double r2 = r * r * (1.0 + 1e-12) + 1e-12;
  const int half = grid.resolution() / 2;
  const int reach = std::min(int(std::floor(r)), half);
  std::vector<std::array<int, 2>> out;
  const int jreach = grid.dim() == 1 ? 0 : reach;
  // Offsets beyond half the period alias onto the same nodes; keep each
  // node once by restricting to the fundamental window.
  const int lo = -reach;
  const int hi = (grid.resolution() % 2 == 0 && reach == half) ? half - 1 : reach;
  const int jlo = -jreach;
  const int jhi = (grid.dim() == 2 && grid.resolution() % 2 == 0 && jreach == half) ? half - 1
                                                                                     : jreach;
  for (int j = jlo; j <= jhi; ++j) {
    for (int i = lo; i <= hi; ++i) {
      // Torus distance of the aliased offset.
      const int ai = std::min(std::abs(i), grid.resolution() - std::abs(i));
      const int aj = std::min(std::abs(j), grid.resolution() - std::abs(j));
      if (double(ai) * ai + double(aj) * aj <= r2) out.push_back({i, j});
    }
  }
  return out;
}

GridFunction erode(const GridFunction& u, double eta) {
  const auto offsets = ball_offsets(u.grid(), eta);
  GridFunction out(u.grid());
  kernels::omp::ball_extremum(shape_of(u.grid()), u.values(), offsets, false, out.values());
  return out;
}

GridFunction dilate(const GridFunction& u, double eta) {
  const auto offsets = ball_offsets(u.grid(), eta);
  GridFunction out(u.grid());
  kernels::omp::ball_extremum(shape_of(u.grid()), u.values(), offsets, true, out.values());
  return out;
}

double lipschitz_constant(const GridFunction& u) {
  const GridVectorField g = gradient_fd(u);
  double best = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) best = std::max(best, norm(g[k]));
  return best;
}

GridFunction mollify(const GridFunction& u, double radius) {
  if (!(radius >= 0.0)) throw DomainError("mollifier radius must be nonnegative");
  const Grid& g = u.grid();
  const auto offsets = ball_offsets(g, radius);
  const double h = g.spacing();
  std::vector<double> w(offsets.size());
  double total = 0.0;
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    const double d = radius > 0.0 ? std::hypot(offsets[k][0] * h, offsets[k][1] * h) / radius : 0.0;
    // Standard bump, strictly positive on the open unit ball; boundary ties
    // get the limiting weight 0.
    w[k] = d < 1.0 ? std::exp(-1.0 / (1.0 - d * d)) : 0.0;
    total += w[k];
  }
  if (!(total > 0.0)) return u;
  for (double& x : w) x /= total;
  GridFunction out(g);
  const int n = g.resolution();
  const int rows = g.dim() == 1 ? 1 : n;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        if (w[k] == 0.0) continue;
        acc += w[k] * u.at(i + offsets[k][0], j + offsets[k][1]);
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

GridFunction shift(const GridFunction& u, int di, int dj) {
  const Grid& g = u.grid();
  GridFunction out(g);
  const int n = g.resolution();
  const int rows = g.dim() == 1 ? 1 : n;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < n; ++i) out.at(i + di, j + dj) = u.at(i, j);
  return out;
}

}  // namespace facetflow
