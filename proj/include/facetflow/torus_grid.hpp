#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "facetflow/error.hpp"

namespace facetflow {

/// Point or vector in R^n, n <= 2. One-dimensional data keeps y = 0.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
  friend Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// Symmetric 2x2 matrix.
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  Sym2& operator+=(const Sym2& o) { xx += o.xx; xy += o.xy; yy += o.yy; return *this; }
  Sym2& operator*=(double s) { xx *= s; xy *= s; yy *= s; return *this; }
  friend Sym2 operator+(Sym2 a, const Sym2& b) { return a += b; }
  friend Sym2 operator*(double s, Sym2 a) { return a *= s; }

  Vec2 apply(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
  double trace() const { return xx + yy; }
  double det() const { return xx * yy - xy * xy; }
  static Sym2 identity() { return {1.0, 0.0, 1.0}; }
  static Sym2 outer(Vec2 v) { return {v.x * v.x, v.x * v.y, v.y * v.y}; }
};

/// trace(A B) for symmetric A, B.
inline double trace_product(const Sym2& a, const Sym2& b) {
  return a.xx * b.xx + 2.0 * a.xy * b.xy + a.yy * b.yy;
}

/// Eigenvalues (ascending) of a symmetric 2x2 matrix.
std::array<double, 2> eigenvalues(const Sym2& m);

/// Inverse of a symmetric 2x2 matrix; throws NumericalFailure if singular.
Sym2 inverse(const Sym2& m);

/// Uniform periodic grid on the unit n-torus, n in {1, 2}. Spacing h = 1/N.
class Grid {
 public:
  Grid(int dim, int resolution);

  int dim() const { return dim_; }
  int resolution() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  std::size_t size() const { return dim_ == 1 ? std::size_t(n_) : std::size_t(n_) * n_; }

  /// Linear index of node (i, j); indices wrap modulo N.
  std::size_t index(int i, int j = 0) const {
    const int iw = wrap(i);
    return dim_ == 1 ? std::size_t(iw) : std::size_t(wrap(j)) * n_ + iw;
  }
  int wrap(int i) const {
    const int r = i % n_;
    return r < 0 ? r + n_ : r;
  }
  /// (i, j) of a linear index; j = 0 in 1D.
  std::array<int, 2> coords(std::size_t k) const {
    return dim_ == 1 ? std::array<int, 2>{int(k), 0}
                     : std::array<int, 2>{int(k % n_), int(k / n_)};
  }
  /// Node position in [0,1)^n.
  Vec2 position(std::size_t k) const {
    const auto c = coords(k);
    return {c[0] * spacing(), dim_ == 1 ? 0.0 : c[1] * spacing()};
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int dim_;
  int n_;
};

/// Scalar field with one value per grid node (fundamental domain storage).
class GridFunction {
 public:
  explicit GridFunction(const Grid& grid, double fill = 0.0)
      : grid_(grid), values_(grid.size(), fill) {}
  GridFunction(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& at(int i, int j = 0) { return values_[grid_.index(i, j)]; }
  double at(int i, int j = 0) const { return values_[grid_.index(i, j)]; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double max() const;
  double min() const;
  double mean() const;
  /// Discrete L2 norm with cell weight h^n.
  double l2_norm() const;
  bool all_finite() const;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);
  GridFunction& operator+=(double c);
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(double s, GridFunction a) { return a *= s; }
  friend bool operator==(const GridFunction&, const GridFunction&) = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Vector field with n components per node, staggered with the forward
/// difference gradient (x component lives on the edge (i, i+1), ...).
class GridVectorField {
 public:
  explicit GridVectorField(const Grid& grid)
      : grid_(grid), x_(grid.size(), 0.0), y_(grid.size(), 0.0) {}

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return x_.size(); }
  Vec2 operator[](std::size_t k) const { return {x_[k], y_[k]}; }
  void set(std::size_t k, Vec2 v) {
    x_[k] = v.x;
    y_[k] = grid_.dim() == 1 ? 0.0 : v.y;
  }
  std::vector<double>& xs() { return x_; }
  std::vector<double>& ys() { return y_; }
  const std::vector<double>& xs() const { return x_; }
  const std::vector<double>& ys() const { return y_; }

  friend bool operator==(const GridVectorField&, const GridVectorField&) = default;

 private:
  Grid grid_;
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Torus distance min_k |x - y + k| for points of [0,1)^n.
double torus_distance(Vec2 x, Vec2 y, int dim);

/// Shortest representative of x - y on the torus (components in [-1/2, 1/2]).
Vec2 torus_difference(Vec2 x, Vec2 y, int dim);

/// Forward-difference gradient. Exact negative adjoint of divergence_fd.
GridVectorField gradient_fd(const GridFunction& u);

/// Backward-difference divergence; output has zero mean.
GridFunction divergence_fd(const GridVectorField& z);

/// Unweighted inner products used by the adjointness identity.
double inner(const GridFunction& a, const GridFunction& b);
double inner(const GridVectorField& a, const GridVectorField& b);

/// Node offsets (in grid units) of the closed torus ball of radius eta.
/// Ties at the radius boundary are included.
std::vector<std::array<int, 2>> ball_offsets(const Grid& grid, double eta);

/// Pointwise infimum of u over the closed ball of radius eta.
GridFunction erode(const GridFunction& u, double eta);
/// Pointwise supremum of u over the closed ball of radius eta.
GridFunction dilate(const GridFunction& u, double eta);

/// Maximum magnitude of the forward-difference gradient.
double lipschitz_constant(const GridFunction& u);

/// Weighted average over the closed ball of radius r with the standard
/// bump weight; changes a 1-Lipschitz function by at most r.
GridFunction mollify(const GridFunction& u, double radius);

/// Translate by whole grid cells: out(i + di, j + dj) = u(i, j).
GridFunction shift(const GridFunction& u, int di, int dj = 0);

/// Fill a grid function from a callable of the node position.
template <class Fn>
GridFunction sample(const Grid& grid, Fn&& fn) {
  GridFunction out(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) out[k] = fn(grid.position(k));
  return out;
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw GridMismatch(what);
}

}  // namespace facetflow
