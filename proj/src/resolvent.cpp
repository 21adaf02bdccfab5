#include "facetflow/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "facetflow/kernels.hpp"

namespace facetflow {

namespace {

namespace kn = kernels::omp;

kernels::Shape shape_of(const Grid& g) { return {g.dim(), g.resolution()}; }

double cell_volume(const Grid& g) { return std::pow(g.spacing(), g.dim()); }

void check_step(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("resolvent step a must be positive");
}

double default_gap(const GridFunction& psi, double a, const ResolventConfig& cfg) {
  if (cfg.gap_tolerance > 0.0) return cfg.gap_tolerance;
  const double n2 = psi.l2_norm() * psi.l2_norm();
  return cfg.relative_gap * std::max(n2, 1e-30) / a;
}

// Duality gap sum [W(grad v) - z . grad v] h^n for v = psi + a div z.
double duality_gap(const Anisotropy& w, const std::vector<double>& gx,
                   const std::vector<double>& gy, const std::vector<double>& zx,
                   const std::vector<double>& zy, std::vector<double>& scratch, double vol) {
  const std::ptrdiff_t size = std::ptrdiff_t(gx.size());
  w.value_all(gx, gy, scratch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < size; ++k) scratch[k] -= zx[k] * gx[k] + zy[k] * gy[k];
  return kn::sum(scratch) * vol;
}

}  // namespace

ResolventReport resolve_singular(const GridFunction& psi, double a, const Anisotropy& w,
                                 const ResolventConfig& cfg) {
  check_step(a);
  const Grid& g = psi.grid();
  if (w.dim() != g.dim()) throw DomainError("anisotropy and grid dimensions differ");
  if (!psi.all_finite()) throw NumericalFailure("resolvent input is not finite");
  const kernels::Shape s = shape_of(g);
  const std::size_t size = g.size();
  const double h = g.spacing();
  const double inv_h = 1.0 / h;
  const double vol = cell_volume(g);
  const double op_norm = std::sqrt(4.0 * g.dim()) / h;
  double tau = cfg.tau > 0.0 ? cfg.tau : 1.0 / op_norm;
  double sigma = cfg.sigma > 0.0 ? cfg.sigma : 1.0 / op_norm;
  if (tau * sigma * op_norm * op_norm > 1.0 + 1e-12) {
    throw DomainError("primal-dual steps violate tau sigma ||grad||^2 <= 1");
  }
  const double inv_a = 1.0 / a;
  const double gamma = inv_a;
  const double tau0 = tau, sigma0 = sigma;
  const double restart = cfg.restart_decay >= 0.0 ? cfg.restart_decay : (g.dim() == 1 ? 0.5 : 0.0);

  ResolventReport rep{psi, GridVectorField(g), GridFunction(g), 0, 0.0, 0.0, 0.0, 0.0, false};
  rep.gap_tolerance = default_gap(psi, a, cfg);

  std::vector<double> v = psi.values(), vbar = psi.values();
  std::vector<double> gx(size), gy(size), divz(size, 0.0), scratch(size);
  std::vector<double>& zx = rep.z.xs();
  std::vector<double>& zy = rep.z.ys();
  std::vector<double> cand(size);

  auto certify = [&]() {
    // Candidate from the dual iterate: psi + a div z.
    for (std::size_t k = 0; k < size; ++k) cand[k] = psi[k] + a * divz[k];
    kn::gradient(s, cand, inv_h, gx, gy);
    return duality_gap(w, gx, gy, zx, zy, scratch, vol);
  };

  double gap = certify();
  double restart_gap = gap;
  int it = 0;
  while (gap > rep.gap_tolerance && it < cfg.max_iterations) {
    for (int inner = 0; inner < cfg.check_every && it < cfg.max_iterations; ++inner, ++it) {
      kn::gradient(s, vbar, inv_h, gx, gy);
      const std::ptrdiff_t ps = std::ptrdiff_t(size);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < ps; ++k) {
        zx[k] += sigma * gx[k];
        zy[k] += sigma * gy[k];
      }
      w.project_wulff_all(zx, zy);
      kn::divergence(s, zx, zy, inv_h, divz);
      const double theta = 1.0 / std::sqrt(1.0 + 2.0 * gamma * tau);
      kn::prox_step(v, vbar, divz, psi.values(), tau, inv_a, theta);
      tau *= theta;
      sigma /= theta;
    }
    gap = certify();
    if (gap <= restart * restart_gap) {
      // Restart the step schedule from the current iterates.
      tau = tau0;
      sigma = sigma0;
      vbar = v;
      restart_gap = gap;
    }
  }
  for (std::size_t k = 0; k < size; ++k) rep.psi_a[k] = psi[k] + a * divz[k];
  rep.iterations = it;
  rep.gap = gap;
  rep.certified = gap <= rep.gap_tolerance;
  for (std::size_t k = 0; k < size; ++k) rep.curvature[k] = divz[k];
  rep.mean_drift = std::abs(rep.psi_a.mean() - psi.mean());
  return rep;
}

namespace {

struct IntegrandField {
  std::vector<double> value, gx, gy, hxx, hxy, hyy;
  explicit IntegrandField(std::size_t n) : value(n), gx(n), gy(n), hxx(n), hxy(n), hyy(n) {}
};

// Objective sum Phi(grad v) + |v - psi|^2 / (2a) (unweighted) and the jets.
double evaluate(const SmoothIntegrand& phi, kernels::Shape s, double inv_h,
                const std::vector<double>& v, const std::vector<double>& psi, double inv_a,
                std::vector<double>& px, std::vector<double>& py, IntegrandField& f) {
  kn::gradient(s, v, inv_h, px, py);
  const std::ptrdiff_t size = std::ptrdiff_t(v.size());
  std::vector<double> terms(v.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < size; ++k) {
    const Jet j = phi({px[k], py[k]});
    f.value[k] = j.value;
    f.gx[k] = j.gradient.x;
    f.gy[k] = j.gradient.y;
    f.hxx[k] = j.hessian.xx;
    f.hxy[k] = j.hessian.xy;
    f.hyy[k] = j.hessian.yy;
    const double d = v[k] - psi[k];
    terms[k] = j.value + 0.5 * inv_a * d * d;
  }
  return kn::sum(terms);
}

}  // namespace

ResolventReport resolve_regularized(const GridFunction& psi, double a, const SmoothIntegrand& phi,
                                    const ResolventConfig& cfg) {
  check_step(a);
  const Grid& g = psi.grid();
  if (!psi.all_finite()) throw NumericalFailure("resolvent input is not finite");
  const kernels::Shape s = shape_of(g);
  const std::size_t size = g.size();
  const double inv_h = 1.0 / g.spacing();
  const double inv_a = 1.0 / a;
  const bool two_d = g.dim() == 2;

  ResolventReport rep{psi, GridVectorField(g), GridFunction(g), 0, 0.0, 0.0, 0.0, 0.0, false};
  rep.gap_tolerance = cfg.residual_tolerance;

  std::vector<double> v = psi.values();
  std::vector<double> px(size), py(size), divq(size), grad(size), dir(size), trial(size);
  std::vector<double> r(size), zc(size), pc(size), hp(size), diag(size), tx(size), ty(size);
  IntegrandField f(size), ftrial(size);
  double obj = evaluate(phi, s, inv_h, v, psi.values(), inv_a, px, py, f);

  // Hessian-vector product: d / a - div(H grad d).
  auto hess_apply = [&](const std::vector<double>& d, std::vector<double>& out) {
    kn::gradient(s, d, inv_h, tx, ty);
    for (std::size_t k = 0; k < size; ++k) {
      const double x = tx[k], y = ty[k];
      tx[k] = f.hxx[k] * x + f.hxy[k] * y;
      ty[k] = two_d ? f.hxy[k] * x + f.hyy[k] * y : 0.0;
    }
    kn::divergence(s, tx, ty, inv_h, out);
    for (std::size_t k = 0; k < size; ++k) out[k] = d[k] * inv_a - out[k];
  };

  auto residual_of = [&](std::vector<double>& gout) {
    kn::divergence(s, f.gx, two_d ? f.gy : std::vector<double>(size, 0.0), inv_h, divq);
    double worst = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      gout[k] = (v[k] - psi[k]) * inv_a - divq[k];
      worst = std::max(worst, std::abs(a * gout[k]));
    }
    return worst;
  };

  double res = residual_of(grad);
  int it = 0;
  const int max_newton = std::min(cfg.max_iterations, 200);
  while (res > cfg.residual_tolerance && it < max_newton) {
    ++it;
    // Jacobi preconditioner.
    const double ih2 = inv_h * inv_h;
    for (int j = 0; j < (two_d ? g.resolution() : 1); ++j) {
      for (int i = 0; i < g.resolution(); ++i) {
        const std::size_t k = g.index(i, j);
        double d = inv_a + (f.hxx[k] + f.hxx[g.index(i - 1, j)]) * ih2;
        if (two_d) d += (2.0 * f.hxy[k] + f.hyy[k] + f.hyy[g.index(i, j - 1)]) * ih2;
        diag[k] = d > 0.0 ? d : inv_a;
      }
    }
    // Preconditioned CG on H dir = -grad.
    std::fill(dir.begin(), dir.end(), 0.0);
    for (std::size_t k = 0; k < size; ++k) r[k] = -grad[k];
    for (std::size_t k = 0; k < size; ++k) zc[k] = r[k] / diag[k];
    pc = zc;
    double rz = kn::dot(r, zc);
    const double r0 = std::sqrt(kn::dot(r, r));
    for (int cg = 0; cg < 5 * int(size) + 50; ++cg) {
      hess_apply(pc, hp);
      const double php = kn::dot(pc, hp);
      if (!(php > 0.0)) break;
      const double alpha = rz / php;
      for (std::size_t k = 0; k < size; ++k) {
        dir[k] += alpha * pc[k];
        r[k] -= alpha * hp[k];
      }
      if (std::sqrt(kn::dot(r, r)) <= 1e-12 * r0) break;
      for (std::size_t k = 0; k < size; ++k) zc[k] = r[k] / diag[k];
      const double rz_new = kn::dot(r, zc);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < size; ++k) pc[k] = zc[k] + beta * pc[k];
    }
    double slope = kn::dot(grad, dir);
    if (!(slope < 0.0)) {
      // Gradient-descent fallback.
      for (std::size_t k = 0; k < size; ++k) dir[k] = -grad[k] / diag[k];
      slope = kn::dot(grad, dir);
    }
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t k = 0; k < size; ++k) trial[k] = v[k] + step * dir[k];
      const double t_obj = evaluate(phi, s, inv_h, trial, psi.values(), inv_a, tx, ty, ftrial);
      // Near the optimum the objective decrease drowns in rounding; accept
      // full Newton steps that do not increase it beyond that level.
      const double slack = 1e-14 * std::abs(obj);
      if (t_obj <= obj + 1e-4 * step * slope + slack) {
        v.swap(trial);
        obj = t_obj;
        std::swap(f, ftrial);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) throw NumericalFailure("regularized resolvent line search failed");
    kn::gradient(s, v, inv_h, px, py);
    res = residual_of(grad);
  }
  rep.psi_a = GridFunction(g, v);
  for (std::size_t k = 0; k < size; ++k) {
    rep.z.set(k, {f.gx[k], f.gy[k]});
    rep.curvature[k] = (v[k] - psi[k]) * inv_a;
  }
  rep.iterations = it;
  rep.residual = res;
  rep.gap = res;
  rep.certified = res <= cfg.residual_tolerance;
  rep.mean_drift = std::abs(rep.psi_a.mean() - psi.mean());
  return rep;
}

ResolventReport resolve_regularized(const GridFunction& psi, double a,
                                    const MollifiedAnisotropy& wm, const ResolventConfig& cfg) {
  if (wm.dim() != psi.grid().dim()) throw DomainError("anisotropy and grid dimensions differ");
  return resolve_regularized(psi, a, [&wm](Vec2 p) { return wm.jet(p); }, cfg);
}

CurvatureEstimate curvature_dq(const GridFunction& psi, const Anisotropy& w, double a,
                               const ResolventConfig& cfg) {
  ResolventReport rep = resolve_singular(psi, a, w, cfg);
  return {std::move(rep.curvature), rep.certified, rep.gap, rep.iterations};
}

std::vector<double> default_steps() {
  std::vector<double> out;
  for (int k = 0; k <= 6; ++k) out.push_back(1e-2 * std::ldexp(1.0, -k));
  return out;
}

ExtrapolatedCurvature curvature_extrapolated(const GridFunction& psi, const Anisotropy& w,
                                             const std::vector<double>& steps,
                                             const ResolventConfig& cfg) {
  if (steps.empty()) throw DomainError("step list is empty");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0) || (i > 0 && !(steps[i] < steps[i - 1]))) {
      throw DomainError("step list must be positive and strictly decreasing");
    }
  }
  ExtrapolatedCurvature out{GridFunction(psi.grid()), GridFunction(psi.grid()), steps, {}, true};
  std::optional<GridFunction> prev;
  for (double a : steps) {
    CurvatureEstimate c = curvature_dq(psi, w, a, cfg);
    out.certified = out.certified && c.certified;
    if (prev) {
      out.cauchy.push_back((c.curvature - *prev).l2_norm());
      out.richardson = 2.0 * c.curvature - *prev;
    } else {
      out.richardson = c.curvature;
    }
    prev = c.curvature;
    out.curvature = std::move(c.curvature);
  }
  return out;
}

namespace {

template <class Pick>
double ball_extreme(const GridFunction& f, Vec2 center, double delta, Pick pick) {
  const Grid& g = f.grid();
  if (!(delta >= g.spacing() * (1.0 - 1e-12))) throw DomainError("ball radius below grid spacing");
  bool any = false;
  double best = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (torus_distance(g.position(k), center, g.dim()) <= delta * (1.0 + 1e-12)) {
      best = any ? pick(best, f[k]) : f[k];
      any = true;
    }
  }
  if (!any) throw DomainError("empty ball");
  return best;
}

}  // namespace

double essinf_ball(const GridFunction& f, Vec2 center, double delta) {
  return ball_extreme(f, center, delta, [](double a, double b) { return std::min(a, b); });
}

double esssup_ball(const GridFunction& f, Vec2 center, double delta) {
  return ball_extreme(f, center, delta, [](double a, double b) { return std::max(a, b); });
}

Mask facet_interior(const GridFunction& psi) {
  const Grid& g = psi.grid();
  const GridVectorField d = gradient_fd(psi);
  const double lip = lipschitz_constant(psi);
  Mask flat(g);
  for (int j = 0; j < (g.dim() == 2 ? g.resolution() : 1); ++j) {
    for (int i = 0; i < g.resolution(); ++i) {
      const std::size_t k = g.index(i, j);
      // Backward differences are the forward ones of the left/lower node.
      const double bx = d[g.index(i - 1, j)].x;
      const double by = g.dim() == 2 ? d[g.index(i, j - 1)].y : 0.0;
      const double steep = std::max(norm(d[k]), std::hypot(bx, by));
      flat.set(k, steep <= 0.1 * lip);
    }
  }
  return rho_neighborhood(flat, -2.0 * g.spacing());
}

MonotonicityReport monotonicity_check(const SupportFunctionCertificate& gc,
                                      const SupportFunctionCertificate& hc, double delta_sep,
                                      const Anisotropy& w, const std::vector<double>& steps,
                                      const ResolventConfig& cfg) {
  const Grid& g = gc.psi.grid();
  require_same_grid(g, hc.psi.grid(), "monotonicity check");
  const double h = g.spacing();
  if (delta_sep < 2.0 * h * (1.0 - 1e-12)) throw PreconditionError("delta_sep must be >= 2h");
  if (!pair_leq(pair_nbhd(gc.pair, delta_sep), hc.pair)) {
    throw PreconditionError("U^delta(pair G) is not below pair H");
  }
  MonotonicityReport rep{rho_neighborhood(gc.pair.facet() & hc.pair.facet(), -2.0 * h),
                         curvature_extrapolated(gc.psi, w, steps, cfg),
                         curvature_extrapolated(hc.psi, w, steps, cfg), 0.0, 0, 0.0};
  bool any = false;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!rep.domain[k]) continue;
    const double cg = rep.curvature_g.curvature[k];
    const double ch = rep.curvature_h.curvature[k];
    const double margin = ch - cg;
    if (!any || margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_node = k;
    }
    any = true;
    rep.scale = std::max({rep.scale, std::abs(cg), std::abs(ch)});
  }
  return rep;
}

}  // namespace facetflow
