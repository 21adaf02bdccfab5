#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/speed_law.hpp"

namespace facetflow {

/// Convex function sampled on a uniform box [lo, hi]^n with `resolution`
/// nodes per axis (endpoints included). Nodes may carry the +infinity flag;
/// the flag is stored separately and never encoded as a large float.
class SampledConvexFunction {
 public:
  SampledConvexFunction(int dim, double lo, double hi, int resolution);

  /// Tabulate fn; non-finite results become flagged nodes.
  template <class Fn>
  static SampledConvexFunction sample(int dim, double lo, double hi, int resolution, Fn&& fn) {
    SampledConvexFunction f(dim, lo, hi, resolution);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double v = fn(f.node(k));
      if (std::isfinite(v)) {
        f.set(k, v);
      } else {
        f.set_infinite(k);
      }
    }
    return f;
  }

  int dim() const { return dim_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int resolution() const { return n_; }
  double spacing() const { return (hi_ - lo_) / (n_ - 1); }
  std::size_t size() const { return values_.size(); }
  std::size_t index(int i, int j = 0) const { return std::size_t(j) * n_ + i; }
  Vec2 node(std::size_t k) const;

  bool finite(std::size_t k) const { return !infinite_[k]; }
  /// Value at a finite node (undefined for flagged nodes).
  double value(std::size_t k) const { return values_[k]; }
  void set(std::size_t k, double v) {
    values_[k] = v;
    infinite_[k] = 0;
  }
  void set_infinite(std::size_t k) {
    values_[k] = 0.0;
    infinite_[k] = 1;
  }
  std::size_t finite_count() const;

  /// Multilinear interpolation; nullopt (+infinity) outside the box or when
  /// any contributing node is flagged.
  std::optional<double> interpolate(Vec2 x) const;

 private:
  int dim_;
  double lo_, hi_;
  int n_;
  std::vector<double> values_;
  std::vector<std::uint8_t> infinite_;
};

/// Discrete Legendre-Fenchel transform f*(x) = max_p x.p - f(p) over finite
/// nodes, on the box [lo, hi]^n with `resolution` nodes. Exact for the
/// sampled data: lower convex hull plus a monotone argmax sweep per line, two
/// separable passes in 2D. Nodes whose maximiser sits on the box boundary
/// with x pointing outward beyond the boundary chord slope are flagged
/// +infinity: there the truncation of the p-box, not f, determines the value.
/// Throws DomainError when f has no finite node.
SampledConvexFunction legendre_transform(const SampledConvexFunction& f, double lo, double hi,
                                         int resolution);

/// -log(1 - |p|^2) on the open unit ball, nullopt (+infinity) outside.
std::optional<double> cap_function(Vec2 p, int dim = 2);

struct BarrierProvenance {
  double delta = 0.0;
  double bound_k = 0.0;
  double mu = 0.0;
  int m0 = 0;
  int sphere_samples = 0;
};

/// W_{m;A,q}(p) = A (W_m(p) + q cap(p/q) - W_m(0)) on |p| < q and its
/// conjugate. The conjugate is evaluated pointwise by Newton's method on
/// grad W_{m;A,q}(p) = x (so grad W* = p and hess W* = [hess W_{m;A,q}(p)]^-1
/// exactly); a tabulated transform is kept for inspection and cross-checks.
class BarrierFamily {
 public:
  /// Throws DomainError for non-positive A or q.
  BarrierFamily(MollifiedAnisotropy wm, double a, double q);

  const MollifiedAnisotropy& anisotropy() const { return wm_; }
  int dim() const { return wm_.dim(); }
  double amplitude() const { return a_; }
  double cap_radius() const { return q_; }

  /// W_{m;A,q}; nullopt outside the open ball of radius q.
  std::optional<double> primal(Vec2 p) const;
  /// Jet of W_{m;A,q}; throws DomainError for |p| >= q.
  Jet primal_jet(Vec2 p) const;

  /// W*_{m;A,q}(x) with gradient (= maximiser p) and Hessian.
  Jet conjugate(Vec2 x) const;
  /// Maximiser p(x) = grad W*(x); |p| < q.
  Vec2 conjugate_gradient(Vec2 x) const;
  /// L_m(W*)(x) = trace[hess W_m(grad W*) hess W*].
  double operator_value(Vec2 x) const;

  /// Tabulated W_{m;A,q} and its discrete transform (empty until built).
  void build_tables(int p_resolution, double x_extent, int x_resolution);
  const std::optional<SampledConvexFunction>& primal_table() const { return primal_table_; }
  const std::optional<SampledConvexFunction>& conjugate_table() const { return conj_table_; }

  BarrierProvenance provenance;

 private:
  Vec2 solve(Vec2 x) const;

  MollifiedAnisotropy wm_;
  double a_, q_;
  double wm0_;
  std::optional<SampledConvexFunction> primal_table_;
  std::optional<SampledConvexFunction> conj_table_;
};

/// beta_{A,q} = sup{|F(p, xi)| : |p| <= q, |xi| <= n/A} + 1, by dense
/// sampling refined around the best sample.
double beta_aq(const SpeedLaw& f, int dim, double a, double q);

struct BarrierParameters {
  int m0 = 0;
  double a = 0.0;
  double q = 0.0;
  double mu = 0.0;
  /// Smallest sampled W*_{m;A,q}(x) over |x| >= delta, per verified m.
  std::vector<std::pair<int, double>> lower_bounds;
};

/// Constants of the lower bound W* >= 2K: mu = sup_{|p|=1/2} W + cap,
/// A = delta/(8 mu), q = 8K/delta, m0 = smallest power of two with
/// sup_{|p|=q/2} |W_m(p) - W_m(0) - W(p)| <= q mu, then W* >= 2K checked at
/// `samples` points with |x| >= delta for m0 and 2 m0. Throws
/// PreconditionError with the counterexample when the check fails.
BarrierParameters choose_parameters(double delta, double bound_k, const AnisotropyPtr& w,
                                    int samples = 1000, std::uint64_t seed = 1);

/// Periodised upper barrier min_k beta t + W*(x + k - xi0) + offset over
/// k in {-1, 0, 1}^n, which holds the nearest copies of xi0 for x, xi0 in
/// [0,1)^n.
double barrier_upper(const BarrierFamily& b, double beta, Vec2 x, double t, Vec2 xi0,
                     double offset);
/// Lower barrier max_k -beta t - W*(-(x + k - xi0)) + offset.
double barrier_lower(const BarrierFamily& b, double beta, Vec2 x, double t, Vec2 xi0,
                     double offset);

}  // namespace facetflow
