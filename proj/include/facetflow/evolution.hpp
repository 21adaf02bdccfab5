#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/convex_conjugate.hpp"
#include "facetflow/facet_calculus.hpp"
#include "facetflow/speed_law.hpp"
#include "facetflow/torus_grid.hpp"

namespace facetflow {

namespace detail {
class ScaledFlux2d;
}

/// grad W_m sampled for fast evaluation. In 1D a cubic Hermite table of W_m'
/// on [-1.25/m, 1.25/m], extended linearly outside (W_m'' = 2/m there, so the
/// extension is exact). In 2D grad W_m(p) = G(m p) + 2p/m with G = grad(W *
/// phi_1) tabulated once per model (bilinear; Cartesian near the origin, in
/// (1/|q|, angle) further out).
class FluxTable {
 public:
  explicit FluxTable(std::shared_ptr<const MollifiedAnisotropy> wm);

  const MollifiedAnisotropy& anisotropy() const { return *wm_; }
  Vec2 operator()(Vec2 p) const;
  /// Flux of every forward-difference gradient (gx[k], gy[k]), in place.
  void apply(std::span<double> gx, std::span<double> gy) const;

 private:
  std::shared_ptr<const MollifiedAnisotropy> wm_;
  double lo_ = 0.0, step_ = 0.0;
  int n_ = 0;
  std::vector<double> gx_, dg_;
  std::shared_ptr<const detail::ScaledFlux2d> scaled_;
};

struct EvolutionConfig {
  std::shared_ptr<const MollifiedAnisotropy> wm;
  SpeedLaw speed = SpeedLaw::tv_flow();
  double final_time = 0.0;
  /// Safety factor in (0, 1).
  double cfl = 0.9;
  /// Fixed step; 0 selects cfl h^2 / (2n a_m Lambda_F).
  double dt = 0.0;
  /// Snapshots are stored at multiples of this interval (0: initial and
  /// final state only) and at every probe time; monitors are sampled at
  /// multiples of monitor_interval (0: T / 200). The step is shortened to
  /// land on these times exactly.
  double snapshot_interval = 0.0;
  double monitor_interval = 0.0;
  std::vector<double> probe_times;
};

struct Snapshot {
  double time = 0.0;
  GridFunction u;
};

struct MonitorSample {
  double time = 0.0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double lipschitz = 0.0;
};

struct EvolutionTrace {
  std::vector<Snapshot> snapshots;
  std::vector<MonitorSample> monitors;
  double dt = 0.0;
  /// Lambda_F used for the step, after the 2x margin.
  double speed_slope = 0.0;
  double p_range = 0.0;
  double xi_range = 0.0;
  long steps = 0;
  /// Largest realised |p| and |xi| (for the CFL audit).
  double observed_p = 0.0;
  double observed_xi = 0.0;

  const GridFunction& final_state() const { return snapshots.back().u; }
  /// Snapshot stored at exactly time t; throws DomainError when absent.
  const Snapshot& at(double t) const;
};

/// Stability data for one run: step, gradient range, speed slope.
struct StepPlan {
  double dt = 0.0;
  double p_range = 0.0;
  double xi_range = 0.0;
  double speed_slope = 0.0;
};

/// Chooses the explicit step for u0. Throws CflViolation when cfg.cfl is
/// outside (0, 1) or a fixed cfg.dt exceeds the stability bound.
StepPlan plan_step(const GridFunction& u0, const EvolutionConfig& cfg);

/// L_m u = div_fd(grad W_m(grad_fd u)) (divergence form; forward fluxes,
/// backward divergence).
GridFunction operator_lm(const GridFunction& u, const FluxTable& flux);

/// Centered gradient (u(x + h e_i) - u(x - h e_i)) / 2h.
GridVectorField centered_gradient(const GridFunction& u);

/// One step u - dt F(grad_c u, L_m u). Throws NumericalFailure naming the
/// first non-finite node.
GridFunction step_explicit(const GridFunction& u, const FluxTable& flux, const SpeedLaw& f,
                           double dt);

/// Iterates step_explicit to cfg.final_time. Throws DomainError for
/// non-finite u0 or non-positive T, CflViolation when the realised (p, xi)
/// range needs a smaller step than the one chosen.
EvolutionTrace evolve(const GridFunction& u0, const EvolutionConfig& cfg);

struct ComparisonReport {
  double max_crossing = 0.0;   // max over time of max(u - v, 0)
  double min_gap = 0.0;        // min over time and nodes of v - u
  double crossing_time = 0.0;
  double tolerance = 0.0;
  long steps = 0;
  bool passed() const { return max_crossing <= tolerance; }
};

/// Evolves both data with a common step. Tolerance defaults to 10h.
/// Throws PreconditionError unless u0 <= v0.
ComparisonReport comparison_harness(const GridFunction& u0, const GridFunction& v0,
                                    const EvolutionConfig& cfg, double tolerance = -1.0);

struct LipschitzReport {
  double initial = 0.0;
  double worst = 0.0;
  double worst_time = 0.0;
  double bound = 0.0;
  /// Monitor series is non-increasing (within 1e-12 relative).
  bool non_increasing = true;
  bool passed() const { return worst <= bound; }
};

/// Checks Lip(u(t)) <= Lip(u0)(1 + rel) + slack over the monitor series;
/// slack defaults to 10h.
LipschitzReport lipschitz_monitor(const EvolutionTrace& trace, double rel = 1e-3,
                                  double slack = -1.0);

struct InitialTraceReport {
  BarrierParameters params;
  double beta = 0.0;
  double delta = 0.0;
  /// max over monitor times of u(xi0, t) - [u0(xi0) + 2 eps + beta t], and of
  /// the symmetric lower quantity.
  double upper_excess = -1e300;
  double lower_excess = -1e300;
  /// Same, node-wise against the full periodised barriers.
  double barrier_excess = -1e300;
  double tolerance = 0.0;
  double horizon = 0.0;
  bool passed() const {
    return upper_excess <= tolerance && lower_excess <= tolerance && barrier_excess <= tolerance;
  }
};

/// Runs u0 to `horizon` and compares with the barrier pair built from
/// choose_parameters(delta, K = max(||u0||_inf, eps)) at xi0, delta the
/// modulus of continuity of u0 at eps (capped at 1/4). Throws
/// PreconditionError when cfg's mollification index is below m0.
InitialTraceReport initial_trace_check(const GridFunction& u0, const EvolutionConfig& cfg,
                                       Vec2 xi0, double eps, double horizon = 0.01,
                                       double tolerance = 1e-6);

struct BarrierResidualReport {
  /// min over nodes of beta + F(grad W*, L_m W*), evaluated analytically.
  double analytic = 0.0;
  /// Same with the discrete operator applied to the sampled periodised
  /// barrier. Reported only: the layer where grad W* crosses the mollifier
  /// radius is about one cell wide at any resolution, and the discrete
  /// operator over- or undershoots there by O(1/A).
  double discrete = 0.0;
  /// max over the run of u - barrier(., t) when the barrier is evolved.
  double evolved_excess = 0.0;
  double tolerance = 0.0;
  bool passed() const {
    return analytic >= -tolerance && evolved_excess <= tolerance;
  }
};

/// Supersolution audit of the upper barrier beta t + W*(x - xi0) on grid g.
BarrierResidualReport barrier_residual_check(const BarrierFamily& b, double beta, Vec2 xi0,
                                             const Grid& g, const EvolutionConfig& cfg,
                                             double tolerance = 1e-6);

/// sup over common snapshot times of |u_m - u_{2m}| for consecutive m.
struct RefinementReport {
  std::vector<int> m;
  std::vector<double> differences;  // size m.size() - 1
  bool strictly_decreasing() const;
};

/// Runs cfg with W_m for every m in the list (base model cfg.wm->base()).
RefinementReport m_refinement(const GridFunction& u0, const EvolutionConfig& cfg,
                              const std::vector<int>& m_list);

/// Smooth space-time test function.
struct TestFunction {
  std::function<double(Vec2, double)> value;
  std::function<Vec2(Vec2, double)> gradient;
  std::function<Sym2(Vec2, double)> hessian;
  std::function<double(Vec2, double)> time_derivative;
};

struct ResidualReport {
  bool precondition_met = false;
  std::string reason;
  double residual = 0.0;
  double delta = 0.0;  // faceted test: ball radius giving the reported value
};

/// phi_t + F(grad phi, k(grad phi, hess phi)) at (x_hat, t_hat) when u - phi
/// has a local max over the neighbouring nodes and stored snapshot times;
/// otherwise precondition_met = false with the reason.
ResidualReport conventional_test_residual(const EvolutionTrace& trace, const SpeedLaw& f,
                                          const Anisotropy& w, const TestFunction& phi,
                                          std::size_t node, double t_hat);

/// phi = psi + g(t) with g(t) = u(x_hat, t_hat) - psi(x_hat) + g_slope (t - t_hat)
/// + g_curvature (t - t_hat)^2. General position: u <= erode(psi, eta) + g
/// over the window |x - x_hat| <= 4 eta at t_hat and the neighbouring
/// snapshots (eta defaults to 12h). Returns g_slope + F(0, essinf_ball(curv
/// psi, x_hat, delta)), minimised over delta in {3h, 6h, 12h} not above eta.
ResidualReport faceted_test_residual(const EvolutionTrace& trace, const SpeedLaw& f,
                                     const Anisotropy& w, const SupportFunctionCertificate& cert,
                                     double g_slope, std::size_t node, double t_hat,
                                     double eta = -1.0, double g_curvature = 0.0);

}  // namespace facetflow
