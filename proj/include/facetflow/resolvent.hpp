#pragma once

#include <functional>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/facet_calculus.hpp"
#include "facetflow/torus_grid.hpp"

namespace facetflow {

enum class ResolventAlgorithm { singular, regularized };

struct ResolventConfig {
  ResolventAlgorithm algorithm = ResolventAlgorithm::singular;
  /// Primal and dual step sizes; 0 selects tau = sigma = 1/||grad||.
  /// tau sigma ||grad||^2 <= 1 is required.
  double tau = 0.0;
  double sigma = 0.0;
  /// Duality-gap tolerance; 0 selects 1e-9 ||psi||_2^2 / a.
  double gap_tolerance = 0.0;
  double relative_gap = 1e-9;
  int max_iterations = 200000;
  int check_every = 10;
  /// The step schedule restarts whenever the gap has dropped by this factor
  /// since the last restart; 0 disables, negative selects 0.5 in 1D and off
  /// in 2D.
  double restart_decay = -1.0;
  /// Regularized solver: node-wise residual |v - psi - a div grad W_m(grad v)|.
  double residual_tolerance = 1e-11;
};

struct ResolventReport {
  GridFunction psi_a;
  GridVectorField z;
  GridFunction curvature;  // (psi_a - psi) / a
  int iterations = 0;
  double gap = 0.0;
  double gap_tolerance = 0.0;
  double residual = 0.0;
  double mean_drift = 0.0;
  bool certified = false;
};

/// Minimises sum W(grad v) h^n + ||v - psi||^2 h^n / (2a) with the
/// accelerated primal-dual (Chambolle-Pock) method, dual variable projected
/// node-wise onto the Wulff set. Returns psi_a = psi + a div z for the final
/// dual iterate z, certified when the duality gap
/// sum [W(grad psi_a) - z . grad psi_a] h^n is within tolerance.
ResolventReport resolve_singular(const GridFunction& psi, double a, const Anisotropy& w,
                                 const ResolventConfig& cfg = {});

/// Smooth convex integrand Phi(p) with gradient and Hessian.
using SmoothIntegrand = std::function<Jet(Vec2)>;

/// Minimises sum Phi(grad v) h^n + ||v - psi||^2 h^n / (2a) by damped Newton
/// (preconditioned CG inner solves, gradient-descent fallback). The report's
/// z is grad Phi(grad psi_a) and `residual` the largest node-wise
/// |psi_a - psi - a div z|; certified when it is within tolerance. Throws
/// NumericalFailure when the line search fails.
ResolventReport resolve_regularized(const GridFunction& psi, double a, const SmoothIntegrand& phi,
                                    const ResolventConfig& cfg = {});
ResolventReport resolve_regularized(const GridFunction& psi, double a,
                                    const MollifiedAnisotropy& wm,
                                    const ResolventConfig& cfg = {});

struct CurvatureEstimate {
  GridFunction curvature;
  bool certified = false;
  double gap = 0.0;
  int iterations = 0;
};

/// (psi_a - psi) / a, an approximation of -d^0 E(psi).
CurvatureEstimate curvature_dq(const GridFunction& psi, const Anisotropy& w, double a,
                               const ResolventConfig& cfg = {});

struct ExtrapolatedCurvature {
  /// Difference quotient at the smallest a.
  GridFunction curvature;
  /// Richardson combination 2 c(a_last) - c(a_prev) of the two smallest
  /// steps, reported only.
  GridFunction richardson;
  std::vector<double> steps;
  /// L2 distance between consecutive difference quotients.
  std::vector<double> cauchy;
  bool certified = true;
};

/// Default step list 1e-2 * 2^-k, k = 0..6.
std::vector<double> default_steps();

/// Difference quotients along a decreasing list of steps. Throws DomainError
/// unless the list is strictly decreasing and positive.
ExtrapolatedCurvature curvature_extrapolated(const GridFunction& psi, const Anisotropy& w,
                                             const std::vector<double>& steps,
                                             const ResolventConfig& cfg = {});

/// Min (max) of f over the nodes of the closed torus ball B_delta(center).
/// Throws DomainError for delta < h.
double essinf_ball(const GridFunction& f, Vec2 center, double delta);
double esssup_ball(const GridFunction& f, Vec2 center, double delta);

/// Nodes where |grad psi| <= 0.1 Lip(psi) (forward and backward differences),
/// eroded by 2h.
Mask facet_interior(const GridFunction& psi);

struct MonotonicityReport {
  /// Intersection of the zero facets of both pairs, eroded by 2h.
  Mask domain;
  ExtrapolatedCurvature curvature_g;
  ExtrapolatedCurvature curvature_h;
  /// min over the domain of curv_H - curv_G.
  double worst_margin = 0.0;
  std::size_t worst_node = 0;
  /// max |curv| over the domain.
  double scale = 0.0;
  bool ordered(double relative_tolerance) const {
    return worst_margin >= -relative_tolerance * scale;
  }
};

/// Checks -d^0 E(psi_G) <= -d^0 E(psi_H) on the common facet. Throws
/// PreconditionError unless delta_sep >= 2h and U^{delta_sep}(pair G) <= pair H.
MonotonicityReport monotonicity_check(const SupportFunctionCertificate& g,
                                      const SupportFunctionCertificate& h, double delta_sep,
                                      const Anisotropy& w,
                                      const std::vector<double>& steps = default_steps(),
                                      const ResolventConfig& cfg = {});

}  // namespace facetflow
