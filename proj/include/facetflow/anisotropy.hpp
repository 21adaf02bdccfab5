#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "facetflow/torus_grid.hpp"

namespace facetflow {

/// Convex, even, one-homogeneous anisotropy W on R^n (n = 1, 2), C^2 away
/// from the origin with W^2 strictly convex. In one dimension only the x
/// components of arguments are used and y components of results are zero.
class Anisotropy {
 public:
  explicit Anisotropy(int dim);
  virtual ~Anisotropy() = default;

  int dim() const { return dim_; }
  virtual std::string name() const = 0;

  double value(Vec2 p) const { return value_impl(restrict(p)); }
  /// Throws DomainError at p = 0.
  Vec2 gradient(Vec2 p) const;
  /// Throws DomainError at p = 0.
  Sym2 hessian(Vec2 p) const;
  /// Declared constant with W(p) >= lambda0 |p|.
  virtual double lower_bound() const = 0;

  /// Closed-form dual norm W°, used by hot loops. The sampled
  /// counterpart is dual_norm().
  double gauge(Vec2 x) const;
  /// Euclidean projection onto the Wulff set {W° <= 1}.
  Vec2 project_wulff(Vec2 z) const;

  /// Array forms for hot loops: project every (zx[k], zy[k]) in place, and
  /// out[k] = W(px[k], py[k]).
  virtual void project_wulff_all(std::span<double> zx, std::span<double> zy) const;
  virtual void value_all(std::span<const double> px, std::span<const double> py,
                         std::span<double> out) const;

 protected:
  Vec2 restrict(Vec2 p) const { return dim_ == 1 ? Vec2{p.x, 0.0} : p; }
  virtual double value_impl(Vec2 p) const = 0;
  virtual Vec2 gradient_impl(Vec2 p) const = 0;
  virtual Sym2 hessian_impl(Vec2 p) const = 0;
  virtual double gauge_impl(Vec2 x) const = 0;
  virtual Vec2 project_impl(Vec2 z) const = 0;

 private:
  int dim_;
};

using AnisotropyPtr = std::shared_ptr<const Anisotropy>;

/// W(p) = |p|.
AnisotropyPtr make_euclidean(int dim);
/// W(p) = sqrt(p^T M p) with M symmetric positive definite.
AnisotropyPtr make_elliptic(int dim, const Sym2& m);
/// W(p) = (sum_i p_i^4)^(1/4).
AnisotropyPtr make_l4(int dim);

/// W°(x) = sup{x.p : W(p) <= 1} by a direction grid search refined with
/// golden-section steps to 1e-8 relative. Throws ToleranceError when the
/// refinement does not settle.
double dual_norm(const Anisotropy& w, Vec2 x);

bool wulff_membership(const Anisotropy& w, Vec2 z, double tol = 1e-9);

/// z in dW(p): z = grad W(p) for p != 0, W°(z) <= 1 at p = 0.
bool subdifferential_contains(const Anisotropy& w, Vec2 p, Vec2 z, double tol = 1e-9);

/// k(p, X) = trace[hess W(p) X]; throws DomainError at p = 0.
double k_operator(const Anisotropy& w, Vec2 p, const Sym2& x);

/// Value, gradient and Hessian of a smooth function at one point.
struct Jet {
  double value = 0.0;
  Vec2 gradient;
  Sym2 hessian;
};

/// W_m(p) = (W * phi_{1/m})(p) + |p|^2/m with phi the standard mollifier.
///
/// The convolution is a fixed lattice quadrature in y (midpoint lattice of
/// 33 cells per mollifier diameter) over the support of phi_eps(p - .). The
/// node weights phi_eps(p - y_k) are corrected by a smooth affine factor so
/// that the rule integrates affine functions exactly; without it the lattice
/// error of the kernel's second derivatives, multiplied by W(p), swamps the
/// 2/m curvature floor at moderate |p|. Value, gradient and Hessian are exact
/// derivatives of one smooth function. a_m is estimated by sampling Hessian
/// eigenvalues.
class MollifiedAnisotropy {
 public:
  MollifiedAnisotropy(AnisotropyPtr base, int m, double sample_radius = 10.0);

  const Anisotropy& base() const { return *base_; }
  const AnisotropyPtr& base_ptr() const { return base_; }
  int dim() const { return base_->dim(); }
  int index() const { return m_; }
  double radius() const { return eps_; }

  double value(Vec2 p) const { return jet(p, false).value; }
  Vec2 gradient(Vec2 p) const;
  Sym2 hessian(Vec2 p) const { return jet(p, true).hessian; }
  Jet jet(Vec2 p, bool with_hessian = true) const;

  /// Sampled ellipticity constant with a_m^-1 I <= hess W_m <= a_m I on
  /// |p| <= sample_radius().
  double ellipticity() const { return a_m_; }
  double min_eigenvalue() const { return lambda_min_; }
  double max_eigenvalue() const { return lambda_max_; }
  double sample_radius() const { return sample_radius_; }

 private:
  Jet evaluate(Vec2 p) const;
  void estimate_ellipticity();

  AnisotropyPtr base_;
  int m_;
  double eps_;
  double step_;   // lattice spacing
  double norm_;   // mollifier normalisation constant
  double sample_radius_;
  double a_m_ = 0.0;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

}  // namespace facetflow
