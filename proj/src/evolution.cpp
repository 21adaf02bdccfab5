#include "facetflow/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "facetflow/error.hpp"
#include "facetflow/kernels.hpp"
#include "facetflow/resolvent.hpp"
#include "hermite_eval.hpp"

namespace facetflow {

namespace {

kernels::Shape shape_of(const Grid& g) { return {g.dim(), g.resolution()}; }

constexpr int kTable1d = 2049;

double time_tol(double t) { return 1e-12 * std::max(1.0, std::abs(t)); }

}  // namespace

namespace detail {

// G(q) = grad (W * phi_1)(q), from which grad W_m(p) = G(p m) + 2p/m because
// the quadrature lattice scales with the mollifier radius and W is
// one-homogeneous. Bilinear on a Cartesian grid for |q| <= 2.25 and on
// (1/|q|, angle) outside, where the 1/|q| = 0 row is grad W itself.
class ScaledFlux2d {
 public:
  explicit ScaledFlux2d(const AnisotropyPtr& base) {
    const MollifiedAnisotropy unit(base, 1);
    inner_.resize(std::size_t(kInner) * kInner);
    outer_.resize(std::size_t(kRadial) * kAngular);
    const std::ptrdiff_t ni = std::ptrdiff_t(inner_.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t k = 0; k < ni; ++k) {
      const Vec2 q{-kHalf + (k % kInner) * kStep, -kHalf + (k / kInner) * kStep};
      inner_[k] = unit.gradient(q) - 2.0 * q;
    }
    const std::ptrdiff_t no = std::ptrdiff_t(outer_.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t k = 0; k < no; ++k) {
      const int i = int(k % kRadial), j = int(k / kRadial);
      const double s = i * kSMax / (kRadial - 1);
      const double th = j * 2.0 * kPi / kAngular;
      const Vec2 dir{std::cos(th), std::sin(th)};
      outer_[k] = i == 0 ? base->gradient(dir) : unit.gradient((1.0 / s) * dir) - (2.0 / s) * dir;
    }
  }

  Vec2 operator()(Vec2 q) const {
    const double r = norm(q);
    if (r <= kSwitch) {
      const double sx = (q.x + kHalf) / kStep, sy = (q.y + kHalf) / kStep;
      const int i = std::min(int(sx), kInner - 2), j = std::min(int(sy), kInner - 2);
      return bilinear(inner_, kInner, i, j, sx - i, sy - j, false);
    }
    const double s = (1.0 / r) / kSMax * (kRadial - 1);
    double th = std::atan2(q.y, q.x);
    if (th < 0.0) th += 2.0 * kPi;
    const double a = th / (2.0 * kPi) * kAngular;
    const int i = std::min(int(s), kRadial - 2);
    const int j = std::min(int(a), kAngular - 1);
    return bilinear(outer_, kRadial, i, j, s - i, a - j, true);
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  static constexpr double kHalf = 2.5, kStep = 0.025, kSwitch = 2.25, kSMax = 0.5;
  static constexpr int kInner = 201, kRadial = 33, kAngular = 720;

  Vec2 bilinear(const std::vector<Vec2>& t, int row, int i, int j, double tx, double ty,
                bool wrap) const {
    const int j1 = wrap ? (j + 1) % kAngular : j + 1;
    const Vec2 a = t[std::size_t(j) * row + i], b = t[std::size_t(j) * row + i + 1];
    const Vec2 c = t[std::size_t(j1) * row + i], d = t[std::size_t(j1) * row + i + 1];
    return (1 - ty) * ((1 - tx) * a + tx * b) + ty * ((1 - tx) * c + tx * d);
  }

  std::vector<Vec2> inner_, outer_;
};

}  // namespace detail

namespace {

// Tables are keyed by the model name and a few sampled values.
std::shared_ptr<const detail::ScaledFlux2d> scaled_flux(const AnisotropyPtr& base) {
  static std::mutex mu;
  static std::vector<std::pair<std::vector<double>, std::shared_ptr<const detail::ScaledFlux2d>>> cache;
  std::vector<double> key;
  for (int k = 0; k < 12; ++k) {
    const double t = 0.3 + k * 0.5;
    key.push_back(base->value({std::cos(t), std::sin(t)}));
  }
  const std::string name = base->name();
  key.push_back(double(std::hash<std::string>{}(name)));
  std::lock_guard<std::mutex> lock(mu);
  for (const auto& [k, t] : cache)
    if (k == key) return t;
  cache.emplace_back(key, std::make_shared<const detail::ScaledFlux2d>(base));
  return cache.back().second;
}

}  // namespace

FluxTable::FluxTable(std::shared_ptr<const MollifiedAnisotropy> wm) : wm_(std::move(wm)) {
  if (!wm_) throw DomainError("flux table needs a mollified anisotropy");
  const double eps = wm_->radius();
  if (wm_->dim() == 2) {
    scaled_ = scaled_flux(wm_->base_ptr());
    return;
  }
  n_ = kTable1d;
  lo_ = -1.25 * eps;
  step_ = 2.5 * eps / (n_ - 1);
  gx_.resize(n_);
  dg_.resize(n_);
  for (int k = 0; k < n_; ++k) {
    const Jet j = wm_->jet({lo_ + k * step_, 0.0});
    gx_[k] = j.gradient.x;
    dg_[k] = j.hessian.xx;
  }
}

Vec2 FluxTable::operator()(Vec2 p) const {
  if (wm_->dim() == 1) {
    return {kernels::detail::hermite_eval(p.x, lo_, step_, gx_, dg_), 0.0};
  }
  const double m = wm_->index();
  return (*scaled_)(m * p) + (2.0 / m) * p;
}

void FluxTable::apply(std::span<double> gx, std::span<double> gy) const {
  if (wm_->dim() == 1) {
    kernels::omp::hermite_flux(gx, lo_, step_, gx_, dg_);
    return;
  }
  const std::ptrdiff_t size = std::ptrdiff_t(gx.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < size; ++k) {
    const Vec2 f = (*this)({gx[k], gy[k]});
    gx[k] = f.x;
    gy[k] = f.y;
  }
}

GridFunction operator_lm(const GridFunction& u, const FluxTable& flux) {
  GridVectorField grad = gradient_fd(u);
  flux.apply(grad.xs(), grad.ys());
  return divergence_fd(grad);
}

GridVectorField centered_gradient(const GridFunction& u) {
  const Grid& g = u.grid();
  const double s = 0.5 / g.spacing();
  GridVectorField out(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto c = g.coords(k);
    const double px = (u.at(c[0] + 1, c[1]) - u.at(c[0] - 1, c[1])) * s;
    const double py = g.dim() == 1 ? 0.0 : (u.at(c[0], c[1] + 1) - u.at(c[0], c[1] - 1)) * s;
    out.set(k, {px, py});
  }
  return out;
}

namespace {

// Explicit stepper with preallocated work arrays.
class Integrator {
 public:
  Integrator(const GridFunction& u0, const SpeedLaw& f, const StepPlan& plan,
             std::shared_ptr<const FluxTable> flux)
      : u_(u0), next_(u0.grid()), xi_(u0.grid()), f_(f), plan_(plan), flux_(std::move(flux)),
        gx_(u0.size()), gy_(u0.size()), cx_(u0.size()), cy_(u0.size()) {
    const Grid& g = u0.grid();
    left_.resize(g.size());
    down_.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
      const auto c = g.coords(k);
      left_[k] = g.index(c[0] - 1, c[1]);
      down_[k] = g.index(c[0], c[1] - 1);
    }
  }

  const GridFunction& u() const { return u_; }
  double time() const { return t_; }
  long steps() const { return steps_; }
  double observed_p() const { return obs_p_; }
  double observed_xi() const { return obs_xi_; }
  const StepPlan& plan() const { return plan_; }

  /// Steps of plan.dt, the last one shortened to land on target.
  void advance_to(double target) {
    while (t_ < target - time_tol(target)) {
      const bool last = target - t_ <= plan_.dt + time_tol(target);
      step(last ? target - t_ : plan_.dt);
      t_ = last ? target : t_ + plan_.dt;
    }
  }

  void step(double dt) {
    const Grid& g = u_.grid();
    const auto shape = shape_of(g);
    const double inv_h = 1.0 / g.spacing();
    const bool two = g.dim() == 2;
    kernels::omp::gradient(shape, u_.values(), inv_h, gx_, gy_);
    const std::ptrdiff_t size = std::ptrdiff_t(g.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < size; ++k) {
      cx_[k] = 0.5 * (gx_[k] + gx_[left_[k]]);
      cy_[k] = two ? 0.5 * (gy_[k] + gy_[down_[k]]) : 0.0;
    }
    flux_->apply(gx_, gy_);
    kernels::omp::divergence(shape, gx_, gy_, inv_h, xi_.values());
    double max_p = 0.0, max_xi = 0.0;
    bool finite = true;
#pragma omp parallel for schedule(static) reduction(max : max_p, max_xi) reduction(&& : finite)
    for (std::ptrdiff_t k = 0; k < size; ++k) {
      const Vec2 p{cx_[k], cy_[k]};
      const double v = u_[k] - dt * f_(p, xi_[k]);
      next_[k] = v;
      finite = finite && std::isfinite(v);
      max_p = std::max(max_p, norm(p));
      max_xi = std::max(max_xi, std::abs(xi_[k]));
    }
    if (!finite) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!std::isfinite(next_[k])) {
          const auto c = g.coords(k);
          std::ostringstream os;
          os << "non-finite value at node (" << c[0] << ", " << c[1] << ") after step "
             << steps_ + 1 << " (t = " << t_ + dt << ", u = " << u_[k] << ", xi = " << xi_[k]
             << ")";
          throw NumericalFailure(os.str());
        }
      }
    }
    obs_p_ = std::max(obs_p_, max_p);
    obs_xi_ = std::max(obs_xi_, max_xi);
    if (max_p > plan_.p_range || max_xi > plan_.xi_range) audit(max_p, max_xi);
    std::swap(u_, next_);
    ++steps_;
  }

 private:
  // The realised range left the sampled one: resample the speed slope and
  // abort when the step is no longer stable.
  void audit(double p, double xi) {
    const Grid& g = u_.grid();
    const double h = g.spacing();
    const double pr = std::max(plan_.p_range, 2.0 * p);
    const double xr = std::max(plan_.xi_range, 2.0 * xi);
    const double lam = f_.xi_slope_bound(g.dim(), pr, xr);
    const double a_m = flux_->anisotropy().ellipticity();
    const double ratio = plan_.dt * 2.0 * g.dim() * a_m * lam / (h * h);
    if (ratio > 1.0) {
      std::ostringstream os;
      os << "CFL violation at step " << steps_ + 1 << ": realised |p| = " << p << ", |xi| = " << xi
         << " give dt 2n a_m Lambda_F / h^2 = " << ratio << " > 1";
      throw CflViolation(os.str());
    }
    plan_.p_range = pr;
    plan_.xi_range = xr;
  }

  GridFunction u_, next_, xi_;
  const SpeedLaw& f_;
  StepPlan plan_;
  std::shared_ptr<const FluxTable> flux_;
  std::vector<double> gx_, gy_, cx_, cy_;
  std::vector<std::size_t> left_, down_;
  double t_ = 0.0;
  long steps_ = 0;
  double obs_p_ = 0.0, obs_xi_ = 0.0;
};

struct PlanWithFlux {
  StepPlan plan;
  std::shared_ptr<const FluxTable> flux;
};

PlanWithFlux make_plan(const GridFunction& u0, const EvolutionConfig& cfg) {
  if (!cfg.wm) throw DomainError("evolution needs a mollified anisotropy");
  if (cfg.wm->dim() != u0.grid().dim()) throw DomainError("anisotropy and grid dimensions differ");
  if (!(cfg.cfl > 0.0 && cfg.cfl < 1.0)) {
    std::ostringstream os;
    os << "CFL violation: safety factor c_cfl = " << cfg.cfl << " is outside (0, 1)";
    throw CflViolation(os.str());
  }
  if (!u0.all_finite()) throw DomainError("initial data is not finite");
  const Grid& g = u0.grid();
  const double h = g.spacing();
  PlanWithFlux out;
  StepPlan& p = out.plan;
  p.p_range = std::max(2.0 * lipschitz_constant(u0), 1.0);
  out.flux = std::make_shared<const FluxTable>(cfg.wm);
  const GridFunction xi = operator_lm(u0, *out.flux);
  p.xi_range = 2.0 * std::max(std::abs(xi.max()), std::abs(xi.min())) + 1.0;
  const double lam = cfg.speed.xi_slope_bound(g.dim(), p.p_range, p.xi_range);
  p.speed_slope = 2.0 * lam;
  const double a_m = cfg.wm->ellipticity();
  const double denom = 2.0 * g.dim() * a_m;
  if (cfg.dt > 0.0) {
    const double ratio = cfg.dt * denom * lam / (h * h);
    if (ratio > 1.0) {
      std::ostringstream os;
      os << "CFL violation: dt = " << cfg.dt << " gives dt 2n a_m Lambda_F / h^2 = " << ratio
         << " > 1";
      throw CflViolation(os.str());
    }
    p.dt = cfg.dt;
  } else {
    p.dt = p.speed_slope > 0.0 ? cfg.cfl * h * h / (denom * p.speed_slope)
                               : std::max(cfg.final_time, 1.0);
  }
  return out;
}

std::vector<double> event_times(const EvolutionConfig& cfg, bool snapshots_only) {
  const double T = cfg.final_time;
  std::vector<double> times{T};
  auto add_multiples = [&](double every) {
    if (!(every > 0.0)) return;
    for (long k = 1;; ++k) {
      const double t = k * every;
      if (t >= T - time_tol(T)) break;
      times.push_back(t);
    }
  };
  add_multiples(cfg.snapshot_interval);
  if (!snapshots_only) add_multiples(cfg.monitor_interval > 0.0 ? cfg.monitor_interval : T / 200);
  for (double t : cfg.probe_times) {
    if (!(t > 0.0 && t <= T + time_tol(T))) throw DomainError("probe time outside (0, T]");
    times.push_back(std::min(t, T));
  }
  std::sort(times.begin(), times.end());
  std::vector<double> out;
  for (double t : times)
    if (out.empty() || t > out.back() + time_tol(t)) out.push_back(t);
  return out;
}

bool contains_time(const std::vector<double>& ts, double t) {
  return std::any_of(ts.begin(), ts.end(), [&](double s) { return std::abs(s - t) <= time_tol(t); });
}

MonitorSample sample_monitors(double t, const GridFunction& u) {
  return {t, u.min(), u.max(), u.mean(), lipschitz_constant(u)};
}

}  // namespace

GridFunction step_explicit(const GridFunction& u, const FluxTable& flux, const SpeedLaw& f,
                           double dt) {
  StepPlan plan;
  plan.dt = dt;
  plan.p_range = std::numeric_limits<double>::infinity();
  plan.xi_range = std::numeric_limits<double>::infinity();
  Integrator it(u, f, plan, std::shared_ptr<const FluxTable>(&flux, [](const FluxTable*) {}));
  it.step(dt);
  return it.u();
}

StepPlan plan_step(const GridFunction& u0, const EvolutionConfig& cfg) {
  return make_plan(u0, cfg).plan;
}

const Snapshot& EvolutionTrace::at(double t) const {
  for (const auto& s : snapshots)
    if (std::abs(s.time - t) <= time_tol(t)) return s;
  throw DomainError("no snapshot stored at t = " + std::to_string(t));
}

EvolutionTrace evolve(const GridFunction& u0, const EvolutionConfig& cfg) {
  if (!(cfg.final_time > 0.0)) throw DomainError("final time must be positive");
  const PlanWithFlux pf = make_plan(u0, cfg);
  const std::vector<double> events = event_times(cfg, false);
  const std::vector<double> snaps = event_times(cfg, true);
  EvolutionTrace trace;
  trace.dt = pf.plan.dt;
  trace.speed_slope = pf.plan.speed_slope;
  trace.snapshots.push_back({0.0, u0});
  trace.monitors.push_back(sample_monitors(0.0, u0));
  Integrator it(u0, cfg.speed, pf.plan, pf.flux);
  for (double t : events) {
    it.advance_to(t);
    trace.monitors.push_back(sample_monitors(t, it.u()));
    if (contains_time(snaps, t)) trace.snapshots.push_back({t, it.u()});
  }
  trace.steps = it.steps();
  trace.p_range = it.plan().p_range;
  trace.xi_range = it.plan().xi_range;
  trace.observed_p = it.observed_p();
  trace.observed_xi = it.observed_xi();
  return trace;
}

ComparisonReport comparison_harness(const GridFunction& u0, const GridFunction& v0,
                                    const EvolutionConfig& cfg, double tolerance) {
  require_same_grid(u0.grid(), v0.grid(), "comparison_harness");
  if (!(cfg.final_time > 0.0)) throw DomainError("final time must be positive");
  for (std::size_t k = 0; k < u0.size(); ++k) {
    if (u0[k] > v0[k]) {
      throw PreconditionError("comparison harness needs u0 <= v0; violated at node " +
                              std::to_string(k));
    }
  }
  const PlanWithFlux pu = make_plan(u0, cfg);
  const PlanWithFlux pv = make_plan(v0, cfg);
  const PlanWithFlux& wide = pu.plan.p_range >= pv.plan.p_range ? pu : pv;
  StepPlan plan = wide.plan;
  plan.dt = std::min(pu.plan.dt, pv.plan.dt);
  plan.xi_range = std::max(pu.plan.xi_range, pv.plan.xi_range);
  Integrator iu(u0, cfg.speed, plan, wide.flux), iv(v0, cfg.speed, plan, wide.flux);
  ComparisonReport rep;
  rep.tolerance = tolerance >= 0.0 ? tolerance : 10.0 * u0.grid().spacing();
  rep.min_gap = std::numeric_limits<double>::infinity();
  auto record = [&](double t) {
    const GridFunction& u = iu.u();
    const GridFunction& v = iv.u();
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double gap = v[k] - u[k];
      if (gap < rep.min_gap) {
        rep.min_gap = gap;
        if (-gap > rep.max_crossing) {
          rep.max_crossing = -gap;
          rep.crossing_time = t;
        }
      }
    }
  };
  record(0.0);
  const double T = cfg.final_time;
  double t = 0.0;
  while (t < T - time_tol(T)) {
    const bool last = T - t <= plan.dt + time_tol(T);
    const double dt = last ? T - t : plan.dt;
    iu.step(dt);
    iv.step(dt);
    t = last ? T : t + dt;
    record(t);
  }
  rep.steps = iu.steps();
  return rep;
}

LipschitzReport lipschitz_monitor(const EvolutionTrace& trace, double rel, double slack) {
  LipschitzReport rep;
  if (trace.monitors.empty()) return rep;
  const double h = trace.snapshots.front().u.grid().spacing();
  rep.initial = trace.monitors.front().lipschitz;
  rep.bound = rep.initial * (1.0 + rel) + (slack >= 0.0 ? slack : 10.0 * h);
  double prev = rep.initial;
  for (const auto& m : trace.monitors) {
    if (m.lipschitz > rep.worst) {
      rep.worst = m.lipschitz;
      rep.worst_time = m.time;
    }
    if (m.lipschitz > prev * (1.0 + 1e-12) + 1e-300) rep.non_increasing = false;
    prev = m.lipschitz;
  }
  return rep;
}

namespace {

std::size_t nearest_node(const Grid& g, Vec2 x) {
  const int n = g.resolution();
  const int i = int(std::lround(x.x * n));
  const int j = g.dim() == 1 ? 0 : int(std::lround(x.y * n));
  return g.index(i, j);
}

// Time-independent parts W*(x - xi0) of the periodised barriers.
GridFunction barrier_profile(const BarrierFamily& b, const Grid& g, Vec2 xi0, bool upper) {
  GridFunction out(g);
  const std::ptrdiff_t size = std::ptrdiff_t(g.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < size; ++k) {
    out[k] = upper ? barrier_upper(b, 0.0, g.position(k), 0.0, xi0, 0.0)
                   : barrier_lower(b, 0.0, g.position(k), 0.0, xi0, 0.0);
  }
  return out;
}

}  // namespace

InitialTraceReport initial_trace_check(const GridFunction& u0, const EvolutionConfig& cfg,
                                       Vec2 xi0, double eps, double horizon, double tolerance) {
  if (!(eps > 0.0)) throw DomainError("epsilon must be positive");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (!cfg.wm) throw DomainError("evolution needs a mollified anisotropy");
  const Grid& g = u0.grid();
  InitialTraceReport rep;
  rep.tolerance = tolerance;
  rep.horizon = horizon;
  const double lip = lipschitz_constant(u0) * (g.dim() == 2 ? std::sqrt(2.0) : 1.0);
  rep.delta = lip > 0.0 ? std::min(eps / lip, 0.25) : 0.25;
  const double k_bound = std::max(std::max(std::abs(u0.max()), std::abs(u0.min())), eps);
  rep.params = choose_parameters(rep.delta, k_bound, cfg.wm->base_ptr());
  if (cfg.wm->index() < rep.params.m0) {
    throw PreconditionError("mollification index " + std::to_string(cfg.wm->index()) +
                            " is below m0 = " + std::to_string(rep.params.m0));
  }
  const BarrierFamily b(*cfg.wm, rep.params.a, rep.params.q);
  rep.beta = beta_aq(cfg.speed, g.dim(), rep.params.a, rep.params.q);
  const std::size_t node = nearest_node(g, xi0);
  const Vec2 xi = g.position(node);
  const double c0 = u0[node];
  const GridFunction up = barrier_profile(b, g, xi, true);
  const GridFunction lo = barrier_profile(b, g, xi, false);

  EvolutionConfig run = cfg;
  run.final_time = horizon;
  run.snapshot_interval = horizon / 20;
  run.monitor_interval = horizon / 20;
  run.probe_times.clear();
  const EvolutionTrace trace = evolve(u0, run);
  for (const auto& s : trace.snapshots) {
    const double t = s.time;
    rep.upper_excess = std::max(rep.upper_excess, s.u[node] - (c0 + 2 * eps + rep.beta * t));
    rep.lower_excess = std::max(rep.lower_excess, (c0 - 2 * eps - rep.beta * t) - s.u[node]);
    for (std::size_t k = 0; k < g.size(); ++k) {
      rep.barrier_excess =
          std::max(rep.barrier_excess, s.u[k] - (up[k] + rep.beta * t + c0 + 2 * eps));
      rep.barrier_excess =
          std::max(rep.barrier_excess, (lo[k] - rep.beta * t + c0 - 2 * eps) - s.u[k]);
    }
  }
  return rep;
}

BarrierResidualReport barrier_residual_check(const BarrierFamily& b, double beta, Vec2 xi0,
                                             const Grid& g, const EvolutionConfig& cfg,
                                             double tolerance) {
  if (!cfg.wm) throw DomainError("evolution needs a mollified anisotropy");
  BarrierResidualReport rep;
  rep.tolerance = tolerance;
  const SpeedLaw& f = cfg.speed;
  const GridFunction phi = barrier_profile(b, g, xi0, true);

  rep.analytic = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    Vec2 y = torus_difference(g.position(k), xi0, g.dim());
    const Jet j = b.conjugate(y);
    rep.analytic = std::min(rep.analytic, beta + f(j.gradient, b.operator_value(y)));
  }

  const FluxTable flux(cfg.wm);
  const GridFunction xi = operator_lm(phi, flux);
  const GridVectorField pc = centered_gradient(phi);
  rep.discrete = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k)
    rep.discrete = std::min(rep.discrete, beta + f(pc[k], xi[k]));

  EvolutionConfig run = cfg;
  if (!(run.final_time > 0.0)) run.final_time = 0.01;
  run.snapshot_interval = run.final_time / 20;
  run.monitor_interval = run.final_time / 20;
  run.probe_times.clear();
  const EvolutionTrace trace = evolve(phi, run);
  rep.evolved_excess = -std::numeric_limits<double>::infinity();
  for (const auto& s : trace.snapshots)
    for (std::size_t k = 0; k < g.size(); ++k)
      rep.evolved_excess = std::max(rep.evolved_excess, s.u[k] - (phi[k] + beta * s.time));
  return rep;
}

bool RefinementReport::strictly_decreasing() const {
  for (std::size_t k = 1; k < differences.size(); ++k)
    if (!(differences[k] < differences[k - 1])) return false;
  return !differences.empty();
}

RefinementReport m_refinement(const GridFunction& u0, const EvolutionConfig& cfg,
                              const std::vector<int>& m_list) {
  if (!cfg.wm) throw DomainError("evolution needs a mollified anisotropy");
  if (m_list.size() < 2) throw DomainError("m refinement needs at least two indices");
  RefinementReport rep;
  rep.m = m_list;
  EvolutionConfig run = cfg;
  if (!(run.snapshot_interval > 0.0)) run.snapshot_interval = run.final_time / 10;
  std::vector<EvolutionTrace> traces;
  for (int m : m_list) {
    run.wm = std::make_shared<const MollifiedAnisotropy>(cfg.wm->base_ptr(), m,
                                                         cfg.wm->sample_radius());
    traces.push_back(evolve(u0, run));
  }
  for (std::size_t k = 1; k < traces.size(); ++k) {
    double worst = 0.0;
    const auto& a = traces[k - 1].snapshots;
    const auto& b = traces[k].snapshots;
    for (std::size_t s = 0; s < std::min(a.size(), b.size()); ++s)
      for (std::size_t i = 0; i < u0.size(); ++i)
        worst = std::max(worst, std::abs(a[s].u[i] - b[s].u[i]));
    rep.differences.push_back(worst);
  }
  return rep;
}

namespace {

std::size_t snapshot_index(const EvolutionTrace& trace, double t) {
  for (std::size_t s = 0; s < trace.snapshots.size(); ++s)
    if (std::abs(trace.snapshots[s].time - t) <= time_tol(t)) return s;
  throw DomainError("no snapshot stored at t = " + std::to_string(t));
}

std::vector<std::size_t> time_window(const EvolutionTrace& trace, std::size_t s) {
  std::vector<std::size_t> out;
  if (s > 0) out.push_back(s - 1);
  out.push_back(s);
  if (s + 1 < trace.snapshots.size()) out.push_back(s + 1);
  return out;
}

}  // namespace

ResidualReport conventional_test_residual(const EvolutionTrace& trace, const SpeedLaw& f,
                                          const Anisotropy& w, const TestFunction& phi,
                                          std::size_t node, double t_hat) {
  ResidualReport rep;
  const std::size_t s = snapshot_index(trace, t_hat);
  const Grid& g = trace.snapshots[s].u.grid();
  const Vec2 x = g.position(node);
  const Vec2 p = phi.gradient(x, t_hat);
  if (norm(p) <= 1e-12) {
    rep.reason = "test function has zero gradient at the contact point";
    return rep;
  }
  const double centre = trace.snapshots[s].u[node] - phi.value(x, t_hat);
  const auto c = g.coords(node);
  const int jr = g.dim() == 1 ? 0 : 1;
  for (std::size_t r : time_window(trace, s)) {
    const double t = trace.snapshots[r].time;
    for (int dj = -jr; dj <= jr; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        // Unwrapped neighbour position so phi need not be periodic.
        const Vec2 y{x.x + di * g.spacing(), x.y + dj * g.spacing()};
        const double d = trace.snapshots[r].u.at(c[0] + di, c[1] + dj) - phi.value(y, t);
        if (d > centre + 1e-14 * (1.0 + std::abs(centre))) {
          rep.reason = "u - phi has no local maximum at the contact point";
          return rep;
        }
      }
    }
  }
  rep.precondition_met = true;
  rep.residual = phi.time_derivative(x, t_hat) + f(p, k_operator(w, p, phi.hessian(x, t_hat)));
  return rep;
}

ResidualReport faceted_test_residual(const EvolutionTrace& trace, const SpeedLaw& f,
                                     const Anisotropy& w, const SupportFunctionCertificate& cert,
                                     double g_slope, std::size_t node, double t_hat, double eta,
                                     double g_curvature) {
  ResidualReport rep;
  const std::size_t s = snapshot_index(trace, t_hat);
  const GridFunction& u = trace.snapshots[s].u;
  const Grid& g = u.grid();
  const double h = g.spacing();
  require_same_grid(g, cert.psi.grid(), "faceted_test_residual");
  if (eta < 0.0) eta = 12.0 * h;
  if (eta < h) throw DomainError("general-position radius must be at least h");
  const GridFunction& psi = cert.psi;
  const GridFunction lower = erode(psi, eta);
  const double g0 = u[node] - psi[node];
  const Vec2 x = g.position(node);
  for (std::size_t r : time_window(trace, s)) {
    const double dt = trace.snapshots[r].time - t_hat;
    const double gt = g0 + g_slope * dt + g_curvature * dt * dt;
    const GridFunction& ur = trace.snapshots[r].u;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (torus_distance(g.position(k), x, g.dim()) > 4.0 * eta) continue;
      if (ur[k] > lower[k] + gt + 1e-12) {
        const auto c = g.coords(k);
        rep.reason = "not in general position: u exceeds the eroded test function at node (" +
                     std::to_string(c[0]) + ", " + std::to_string(c[1]) + ")";
        return rep;
      }
    }
  }
  const ExtrapolatedCurvature curv = curvature_extrapolated(psi, w, default_steps());
  rep.residual = std::numeric_limits<double>::infinity();
  for (double d : {3.0 * h, 6.0 * h, 12.0 * h}) {
    if (d > eta + 1e-15) continue;
    const double r = g_slope + f(Vec2{}, essinf_ball(curv.curvature, x, d));
    if (r < rep.residual) {
      rep.residual = r;
      rep.delta = d;
    }
  }
  rep.precondition_met = true;
  return rep;
}

}  // namespace facetflow
