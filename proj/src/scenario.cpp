#include "facetflow/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "facetflow/evolution.hpp"
#include "facetflow/resolvent.hpp"

namespace facetflow {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Typed view of a validated config.
class Params {
 public:
  explicit Params(Config c) : c_(std::move(c)) {}
  const Config& config() const { return c_; }
  const std::string& str(const std::string& k) const { return c_.raw(k); }
  bool has_value(const std::string& k) const { return c_.has(k) && !c_.raw(k).empty(); }
  double real(const std::string& k) const { return std::stod(c_.raw(k)); }
  int integer(const std::string& k) const { return std::stoi(c_.raw(k)); }
  std::uint64_t u64(const std::string& k) const { return std::stoull(c_.raw(k)); }
  std::vector<double> list(const std::string& k) const {
    std::istringstream in(c_.raw(k));
    std::vector<double> out;
    for (std::string t; in >> t;) out.push_back(std::stod(t));
    return out;
  }
  Vec2 point(const std::string& k) const {
    const auto v = list(k);
    return {v[0], dim() == 2 ? v[1] : 0.0};
  }
  const std::string& kind() const { return str("scenario"); }
  int dim() const { return integer("grid.dim"); }
  Grid grid() const { return Grid(dim(), integer("grid.n")); }

 private:
  Config c_;
};

AnisotropyPtr make_model(const Params& p) {
  const std::string& m = p.str("anisotropy.model");
  if (m == "elliptic") {
    const auto v = p.list("anisotropy.matrix");
    return make_elliptic(p.dim(), Sym2{v[0], v[1], v[2]});
  }
  if (m == "l4") return make_l4(p.dim());
  return make_euclidean(p.dim());
}

SpeedLaw make_speed(const Params& p) {
  return SpeedLaw::by_name(p.str("speed.law"), p.real("speed.driving"));
}

GridFunction noise(const Grid& g, std::mt19937_64& rng, double amp, double cells) {
  std::normal_distribution<double> n(0.0, amp);
  GridFunction f(g);
  for (std::size_t k = 0; k < g.size(); ++k) f[k] = n(rng);
  return cells > 0 ? mollify(f, cells * g.spacing()) : f;
}

GridFunction make_initial(const Params& p, const Grid& g, std::mt19937_64& rng) {
  const std::string& kind = p.str("initial.kind");
  const int dim = g.dim();
  if (kind == "constant") return GridFunction(g, p.real("initial.value"));
  if (kind == "tent") {
    const double s = p.real("initial.slope");
    return sample(g, [&](Vec2 x) {
      const double d = std::min(x.x, 1.0 - x.x);
      return s * (dim == 1 ? d : std::min(d, std::min(x.y, 1.0 - x.y)));
    });
  }
  if (kind == "sin") {
    const double a = p.real("initial.amplitude");
    return sample(g, [&](Vec2 x) {
      return a * std::sin(2 * M_PI * x.x) * (dim == 1 ? 1.0 : std::sin(2 * M_PI * x.y));
    });
  }
  if (kind == "smooth") {
    const double a = p.real("initial.amplitude");
    return sample(g, [&](Vec2 x) {
      const double v = a * std::sin(2 * M_PI * x.x);
      return dim == 1 ? v : v + (2.0 / 3.0) * a * std::cos(2 * M_PI * (x.x + 2 * x.y));
    });
  }
  if (kind == "noise")
    return noise(g, rng, p.real("initial.amplitude"), p.real("initial.smoothing"));
  // facet
  const Vec2 c = p.point("initial.center");
  const double r = p.real("initial.radius"), cap = p.real("initial.cap");
  return sample(g, [&](Vec2 x) {
    return -std::min(cap, std::max(0.0, torus_distance(x, c, dim) - r));
  });
}

class CheckList {
 public:
  void le(const std::string& name, double measured, double bound, std::string note = {}) {
    add({name, "<=", measured, 0.0, bound, bound - measured, measured <= bound, std::move(note)});
  }
  void lt(const std::string& name, double measured, double bound, std::string note = {}) {
    add({name, "<", measured, 0.0, bound, bound - measured, measured < bound, std::move(note)});
  }
  void ge(const std::string& name, double measured, double bound, std::string note = {}) {
    add({name, ">=", measured, 0.0, bound, measured - bound, measured >= bound, std::move(note)});
  }
  void within(const std::string& name, double measured, double target, double tol,
              std::string note = {}) {
    const double m = tol - std::abs(measured - target);
    add({name, "within", measured, target, tol, m, m >= 0.0, std::move(note)});
  }
  void truth(const std::string& name, bool ok, std::string note = {}) {
    add({name, "true", ok ? 1.0 : 0.0, 1.0, 0.0, ok ? 0.0 : -1.0, ok, std::move(note)});
  }
  const std::vector<CheckResult>& results() const { return r_; }

 private:
  void add(CheckResult c) {
    if (!std::isfinite(c.measured)) c.passed = false;
    r_.push_back(std::move(c));
  }
  std::vector<CheckResult> r_;
};

struct Context {
  Params p;
  fs::path dir;
  bool quiet = false;
  std::mt19937_64 rng;
  CheckList checks;
  json diagnostics = json::object();
  std::vector<std::string> artifacts;

  void log(const std::string& s) const {
    if (!quiet) std::cout << s << std::endl;
  }
  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir / name;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    artifacts.push_back(name);
  }
  void grid(const std::string& name, const GridFunction& u, double t) {
    write(name, format_grid(u, t));
  }
};

// Comma-separated table; values with 17 significant digits.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : ncol_(header.size()) { row_text(header); }
  void row(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(format_double(x));
    row_text(s);
  }
  void row_text(const std::vector<std::string>& v) {
    if (v.size() != ncol_) throw std::logic_error("table row width");
    for (std::size_t i = 0; i < v.size(); ++i) text_ += (i ? "," : "") + v[i];
    text_ += '\n';
  }
  const std::string& text() const { return text_; }

 private:
  std::size_t ncol_;
  std::string text_;
};

std::string series_csv(const EvolutionTrace& tr) {
  Table t({"time", "min", "max", "mean", "lipschitz"});
  for (const auto& m : tr.monitors) t.row({m.time, m.min, m.max, m.mean, m.lipschitz});
  return t.text();
}

std::string snapshot_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshots/u_%04zu.grid", i);
  return buf;
}

void write_snapshots(Context& ctx, const EvolutionTrace& tr) {
  for (std::size_t i = 0; i < tr.snapshots.size(); ++i)
    ctx.grid(snapshot_name(i), tr.snapshots[i].u, tr.snapshots[i].time);
}

EvolutionConfig model_config(const Params& p, AnisotropyPtr base) {
  EvolutionConfig cfg;
  cfg.wm = std::make_shared<const MollifiedAnisotropy>(std::move(base), p.integer("anisotropy.m"));
  cfg.speed = make_speed(p);
  return cfg;
}

EvolutionConfig evolution_config(const Params& p, AnisotropyPtr base) {
  EvolutionConfig cfg = model_config(p, std::move(base));
  cfg.final_time = p.real("evolve.final_time");
  cfg.cfl = p.real("evolve.cfl");
  cfg.dt = p.real("evolve.dt");
  cfg.snapshot_interval = p.real("evolve.snapshot_interval");
  cfg.monitor_interval = p.real("evolve.monitor_interval");
  cfg.probe_times = p.list("evolve.probe_times");
  return cfg;
}

void trace_diagnostics(Context& ctx, const EvolutionTrace& tr) {
  ctx.diagnostics["dt"] = tr.dt;
  ctx.diagnostics["steps"] = tr.steps;
  ctx.diagnostics["speed_slope"] = tr.speed_slope;
  ctx.diagnostics["p_range"] = tr.p_range;
  ctx.diagnostics["xi_range"] = tr.xi_range;
  ctx.diagnostics["observed_p"] = tr.observed_p;
  ctx.diagnostics["observed_xi"] = tr.observed_xi;
}

// ---------------------------------------------------------------------------
// Declared checks

bool tent_closed_form(const Params& p) {
  return p.dim() == 1 && p.str("initial.kind") == "tent" &&
         p.str("anisotropy.model") == "euclidean" && p.str("resolvent.algorithm") == "singular";
}

bool tent_facet_law(const Params& p) {
  return p.dim() == 1 && p.str("initial.kind") == "tent" &&
         p.str("anisotropy.model") == "euclidean" && p.str("speed.law") == "tv_flow";
}

bool conserves_mass(const Params& p) { return p.str("speed.law") == "tv_flow"; }

bool max_principle(const Params& p) {
  const std::string& law = p.str("speed.law");
  return law == "tv_flow" || law == "graph_flow" || law == "zero" ||
         (law == "driven" && p.real("speed.driving") == 0.0);
}

std::vector<std::string> plan_checks(const Params& p) {
  const std::string& k = p.kind();
  std::vector<std::string> c;
  if (k == "anisotropy-check") {
    c = {"one-homogeneity", "lower-bound",       "convexity",         "dual-norm",
         "euler-identity",  "mollified-above",   "mollified-ellipticity", "speed-ellipticity"};
  } else if (k == "resolvent") {
    c = {"certified", "mean-conservation"};
    if (p.str("resolvent.algorithm") == "singular") c.push_back("dual-feasibility");
    if (tent_closed_form(p)) {
      c.push_back("tent-facet-half-length");
      c.push_back("tent-peak-drop");
    }
  } else if (k == "curvature") {
    c = {"certified"};
    if (p.str("initial.kind") == "facet") {
      c.push_back("facet-curvature-min");
      c.push_back("facet-curvature-max");
    } else {
      c.push_back("smooth-curvature-l2");
    }
  } else if (k == "monotonicity") {
    c = {"domain-nonempty", "ordered"};
  } else if (k == "evolve") {
    c = {"finite", "lipschitz-bound"};
    if (conserves_mass(p)) c.push_back("mass-conservation");
    if (max_principle(p)) c.push_back("maximum-principle");
    if (tent_facet_law(p)) {
      const auto probes = p.list("evolve.probe_times");
      for (std::size_t i = 0; i < probes.size(); ++i) c.push_back("facet-law-" + std::to_string(i + 1));
    }
    if (p.list("evolve.m_list").size() >= 2) c.push_back("m-refinement");
  } else if (k == "compare") {
    c = {"comparison"};
  } else if (k == "barrier") {
    c = {"proof-constant-a", "proof-constant-q", "conjugate-lower-bound", "initial-trace",
         "barrier-supersolution", "barrier-evolved"};
  } else if (k == "viscosity-test") {
    c = {"touching", p.str("viscosity.mode") + "-residual"};
  }
  return c;
}

// ---------------------------------------------------------------------------
// Scenario runners

std::vector<Vec2> random_points(std::mt19937_64& rng, int n, int dim, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  std::vector<Vec2> out;
  while (int(out.size()) < n) {
    Vec2 x{u(rng), dim == 2 ? u(rng) : 0.0};
    if (norm(x) > 1e-3 * r) out.push_back(x);
  }
  return out;
}

void run_anisotropy(Context& ctx) {
  const Params& p = ctx.p;
  const int dim = p.dim(), n = p.integer("check.samples");
  const AnisotropyPtr w = make_model(p);
  const MollifiedAnisotropy wm(w, p.integer("anisotropy.m"));
  std::uniform_real_distribution<double> lam(1e-3, 10.0);
  const auto pts = random_points(ctx.rng, n, dim, 2.0);
  const auto qts = random_points(ctx.rng, n, dim, 2.0);

  double hom = 0, low = kInf, conv = -kInf, dual = 0, euler = 0, above = kInf, ell = 0;
  for (int i = 0; i < n; ++i) {
    const Vec2 x = pts[i], y = qts[i];
    const double l = lam(ctx.rng);
    hom = std::max(hom, std::abs(w->value(l * x) - l * w->value(x)) / (l * w->value(x)));
    low = std::min(low, w->value(x) / norm(x) - w->lower_bound());
    conv = std::max(conv, w->value(0.5 * (x + y)) - 0.5 * (w->value(x) + w->value(y)));
    const double d = dual_norm(*w, x);
    dual = std::max(dual, std::abs(w->gauge(x) - d) / d);
    const Vec2 e = (1.0 / norm(x)) * x;
    euler = std::max(euler, norm(w->hessian(e).apply(e)));
    above = std::min(above, wm.value(x) - w->value(x) - dot(x, x) / wm.index());
    // Ellipticity of W_m on its sampling range.
    const Vec2 z = (wm.sample_radius() / 2.0) * x;
    const Sym2 h = wm.hessian(z);
    const auto ev = dim == 1 ? std::array<double, 2>{h.xx, h.xx} : eigenvalues(h);
    ell = std::max({ell, 1.0 / (ev[0] * wm.ellipticity()), ev[1] / wm.ellipticity()});
  }
  CheckList& c = ctx.checks;
  c.le("one-homogeneity", hom, 1e-12);
  c.ge("lower-bound", low, -1e-12);
  c.le("convexity", conv, 1e-12);
  c.le("dual-norm", dual, 1e-7);
  c.le("euler-identity", euler, 1e-8);
  c.ge("mollified-above", above, -1e-12);
  c.le("mollified-ellipticity", ell, 1.0 + 1e-3,
       "worst sampled eigenvalue relative to a_m (1 = at the bound)");
  c.truth("speed-ellipticity", check_ellipticity(make_speed(p), dim, 10.0, 100.0, n, ctx.rng));
  ctx.diagnostics["lower_bound_constant"] = w->lower_bound();
  ctx.diagnostics["a_m"] = wm.ellipticity();
  ctx.diagnostics["hessian_min_eigenvalue"] = wm.min_eigenvalue();
  ctx.diagnostics["hessian_max_eigenvalue"] = wm.max_eigenvalue();
}

void run_resolvent(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  const double a = p.real("resolvent.a"), h = g.spacing();
  const AnisotropyPtr w = make_model(p);
  const GridFunction psi = make_initial(p, g, ctx.rng);
  ResolventConfig rc;
  rc.relative_gap = p.real("resolvent.relative_gap");
  rc.restart_decay = p.real("resolvent.restart");
  rc.max_iterations = static_cast<int>(p.integer("resolvent.max_iterations"));
  const bool singular = p.str("resolvent.algorithm") == "singular";
  ctx.log("solving resolvent, a = " + format_double(a));
  const ResolventReport r =
      singular ? resolve_singular(psi, a, *w, rc)
               : resolve_regularized(psi, a, MollifiedAnisotropy(w, p.integer("anisotropy.m")), rc);
  const double scale = std::max({1.0, std::abs(psi.max()), std::abs(psi.min())});
  CheckList& c = ctx.checks;
  if (singular)
    c.le("certified", r.gap, r.gap_tolerance, "duality gap");
  else
    c.le("certified", r.residual, rc.residual_tolerance, "node-wise Euler-Lagrange residual");
  c.le("mean-conservation", std::abs(r.mean_drift), 1e-10 * scale);
  if (singular) {
    double worst = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, w->gauge(r.z[k]));
    c.le("dual-feasibility", worst, 1.0 + 1e-9, "max W°(z)");
  }

  Table t({"quantity", "measured", "target", "tolerance"});
  t.row_text({"iterations", std::to_string(r.iterations), "", ""});
  t.row_text({"gap", format_double(r.gap), "", format_double(r.gap_tolerance)});
  t.row_text({"mean_drift", format_double(r.mean_drift), "0", ""});
  if (tent_closed_form(p)) {
    const double s = p.real("initial.slope");
    const int n = g.resolution();
    int moved = 0;
    for (int i = n / 4; i < 3 * n / 4; ++i)
      if (psi.at(i) - r.psi_a.at(i) > 1e-7) ++moved;
    const double ell = 0.5 * moved * h, drop = psi.max() - r.psi_a.max();
    const double ell_t = std::sqrt(2 * a / s), drop_t = std::sqrt(2 * a * s);
    const double ell_tol = std::max(3 * h, 0.05 * ell_t), drop_tol = std::max(3 * h * s, 0.05 * drop_t);
    c.within("tent-facet-half-length", ell, ell_t, ell_tol, "target sqrt(2a/s)");
    c.within("tent-peak-drop", drop, drop_t, drop_tol, "target sqrt(2as)");
    t.row_text({"facet_half_length", format_double(ell), format_double(ell_t), format_double(ell_tol)});
    t.row_text({"peak_drop", format_double(drop), format_double(drop_t), format_double(drop_tol)});
  }
  ctx.write("resolvent.csv", t.text());
  ctx.diagnostics["iterations"] = r.iterations;
  ctx.diagnostics["gap"] = r.gap;
  ctx.diagnostics["gap_tolerance"] = r.gap_tolerance;
  ctx.diagnostics["residual"] = r.residual;
  ctx.grid("psi.grid", psi, 0.0);
  ctx.grid("psi_a.grid", r.psi_a, a);
  ctx.grid("curvature.grid", r.curvature, a);
}

void run_curvature(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  const AnisotropyPtr w = make_model(p);
  const GridFunction psi = make_initial(p, g, ctx.rng);
  const auto steps = p.list("curvature.a");
  const double tol = p.real("curvature.tolerance");
  ResolventConfig rc;
  rc.relative_gap = p.real("resolvent.relative_gap");
  rc.restart_decay = p.real("resolvent.restart");
  rc.max_iterations = static_cast<int>(p.integer("resolvent.max_iterations"));
  ctx.grid("psi.grid", psi, 0.0);
  bool certified = true;
  std::vector<CurvatureEstimate> est;
  for (double a : steps) {
    ctx.log("difference quotient at a = " + format_double(a));
    est.push_back(curvature_dq(psi, *w, a, rc));
    certified = certified && est.back().certified;
  }
  CheckList& c = ctx.checks;
  c.truth("certified", certified, "every resolvent solve met its gap tolerance");

  if (p.str("initial.kind") == "facet") {
    const double r = p.real("initial.radius");
    const Vec2 center = p.point("initial.center");
    const double ball = p.real("curvature.ball") > 0 ? p.real("curvature.ball") : r / 2;
    const double target =
        p.has_value("curvature.expected") ? p.real("curvature.expected") : -p.dim() / r;
    Table t({"a", "iterations", "gap", "essinf", "esssup"});
    double lo = 0, hi = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      lo = essinf_ball(est[i].curvature, center, ball);
      hi = esssup_ball(est[i].curvature, center, ball);
      t.row({steps[i], double(est[i].iterations), est[i].gap, lo, hi});
    }
    c.within("facet-curvature-min", lo, target, tol * std::abs(target), "essinf over the facet ball");
    c.within("facet-curvature-max", hi, target, tol * std::abs(target), "esssup over the facet ball");
    ctx.write("curvature.csv", t.text());
  } else {
    const GridVectorField d = gradient_fd(psi);
    GridVectorField zr(g);
    for (std::size_t k = 0; k < g.size(); ++k)
      if (norm(d[k]) > 0.0) zr.set(k, w->gradient(d[k]));
    const GridFunction ref = divergence_fd(zr);
    const double cut = p.real("curvature.threshold") * lipschitz_constant(psi);
    Table t({"a", "iterations", "gap", "relative_l2_error"});
    double err = kInf;
    std::size_t nodes = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      double num = 0, den = 0;
      nodes = 0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (norm(d[k]) < cut) continue;
        const double e = est[i].curvature[k] - ref[k];
        num += e * e;
        den += ref[k] * ref[k];
        ++nodes;
      }
      err = std::sqrt(num) / std::max(std::sqrt(den), 1.0);
      t.row({steps[i], double(est[i].iterations), est[i].gap, err});
    }
    c.le("smooth-curvature-l2", err, tol, "L2 error on steep nodes relative to max(|ref|, 1)");
    ctx.diagnostics["compared_nodes"] = nodes;
    ctx.grid("reference.grid", ref, 0.0);
    ctx.write("curvature.csv", t.text());
  }
  ctx.grid("curvature.grid", est.back().curvature, steps.back());
}

void run_monotonicity(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  const AnisotropyPtr w = make_model(p);
  const Vec2 center = p.point("monotonicity.center");
  const double cap = p.real("monotonicity.cap");
  const auto facet = [&](double r) {
    return sample(g, [&](Vec2 x) {
      return -std::min(cap, std::max(0.0, torus_distance(x, center, g.dim()) - r));
    });
  };
  const GridFunction pg = facet(p.real("monotonicity.inner"));
  const GridFunction ph = facet(p.real("monotonicity.outer"));
  const SupportFunctionCertificate cg{pg, pair_of(pg), GridVectorField(g), cap};
  const SupportFunctionCertificate ch{ph, pair_of(ph), GridVectorField(g), cap};
  ctx.log("curvature of both support functions");
  const MonotonicityReport rep = monotonicity_check(cg, ch, p.real("monotonicity.separation"), *w,
                                                    p.list("curvature.a"));
  const double tol = p.real("curvature.tolerance");
  ctx.checks.ge("domain-nonempty", double(rep.domain.count()), 1.0, "nodes in the common facet");
  ctx.checks.ge("ordered", rep.worst_margin, -tol * rep.scale,
                "min of curv_H - curv_G; bound is -tolerance * scale");
  Table t({"quantity", "value"});
  t.row_text({"domain_nodes", std::to_string(rep.domain.count())});
  t.row_text({"worst_margin", format_double(rep.worst_margin)});
  t.row_text({"scale", format_double(rep.scale)});
  t.row_text({"worst_node", std::to_string(rep.worst_node)});
  ctx.write("monotonicity.csv", t.text());
  GridFunction mask(g);
  for (std::size_t k = 0; k < g.size(); ++k) mask[k] = rep.domain[k] ? 1.0 : 0.0;
  ctx.grid("psi_g.grid", pg, 0.0);
  ctx.grid("psi_h.grid", ph, 0.0);
  ctx.grid("domain.grid", mask, 0.0);
  ctx.grid("curvature_g.grid", rep.curvature_g.curvature, rep.curvature_g.steps.back());
  ctx.grid("curvature_h.grid", rep.curvature_h.curvature, rep.curvature_h.steps.back());
}

void run_evolve(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  const AnisotropyPtr w = make_model(p);
  const EvolutionConfig cfg = evolution_config(p, w);
  const GridFunction u0 = make_initial(p, g, ctx.rng);
  ctx.log("evolving to T = " + format_double(cfg.final_time));
  const EvolutionTrace tr = evolve(u0, cfg);
  trace_diagnostics(ctx, tr);
  CheckList& c = ctx.checks;
  bool finite = true;
  for (const auto& s : tr.snapshots) finite = finite && s.u.all_finite();
  c.truth("finite", finite);
  const LipschitzReport lip = lipschitz_monitor(tr, p.real("evolve.lipschitz_rel"));
  c.le("lipschitz-bound", lip.worst, lip.bound, "max Lip(u(t)) vs Lip(u0)(1 + rel) + 10h");
  ctx.diagnostics["lipschitz_non_increasing"] = lip.non_increasing;
  const double scale = std::max({1.0, std::abs(u0.max()), std::abs(u0.min())});
  if (conserves_mass(p)) {
    double drift = 0.0;
    for (const auto& m : tr.monitors) drift = std::max(drift, std::abs(m.mean - tr.monitors.front().mean));
    c.le("mass-conservation", drift, 1e-10 * scale);
  }
  if (max_principle(p)) {
    double excess = 0.0;
    for (const auto& m : tr.monitors)
      excess = std::max({excess, m.max - u0.max(), u0.min() - m.min});
    c.le("maximum-principle", excess, 1e-12 * scale);
  }
  if (tent_facet_law(p)) {
    const double s = p.real("initial.slope"), peak = u0.max();
    const double tol = p.real("evolve.facet_tolerance");
    const auto probes = p.list("evolve.probe_times");
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const double expected = peak - std::sqrt(2 * s * probes[i]);
      c.within("facet-law-" + std::to_string(i + 1), tr.at(probes[i]).u.max(), expected,
               tol * std::abs(expected), "peak level at t = " + format_double(probes[i]));
    }
  }
  ctx.write("series.csv", series_csv(tr));
  write_snapshots(ctx, tr);

  const auto ml = p.list("evolve.m_list");
  if (ml.size() >= 2) {
    std::vector<int> ms(ml.begin(), ml.end());
    ctx.log("m refinement");
    const RefinementReport r = m_refinement(u0, cfg, ms);
    Table t({"m", "m_next", "sup_difference"});
    double ratio = 0.0;
    for (std::size_t i = 0; i < r.differences.size(); ++i) {
      t.row({double(ms[i]), double(ms[i + 1]), r.differences[i]});
      if (i > 0) ratio = std::max(ratio, r.differences[i] / r.differences[i - 1]);
    }
    if (r.differences.size() < 2) ratio = 0.0;
    c.lt("m-refinement", ratio, 1.0, "largest ratio of consecutive sup differences");
    ctx.write("refinement.csv", t.text());
  }
}

void run_compare(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  const EvolutionConfig cfg = evolution_config(p, make_model(p));
  const double tol = p.real("compare.tolerance") > 0 ? p.real("compare.tolerance") : 10 * g.spacing();
  const double amp = p.real("compare.amplitude"), cells = p.real("compare.smoothing");
  Table t({"pair", "max_crossing", "min_gap", "crossing_time", "steps"});
  double worst = 0.0;
  for (int i = 0; i < p.integer("compare.pairs"); ++i) {
    const GridFunction u0 = noise(g, ctx.rng, amp, cells);
    const GridFunction w0 = noise(g, ctx.rng, amp, cells);
    // max(u0, w0) touches u0 on large sets.
    GridFunction v0 = u0;
    for (std::size_t k = 0; k < g.size(); ++k) v0[k] = std::max(u0[k], w0[k]);
    ctx.log("pair " + std::to_string(i + 1));
    const ComparisonReport r = comparison_harness(u0, v0, cfg, tol);
    worst = std::max(worst, r.max_crossing);
    t.row({double(i + 1), r.max_crossing, r.min_gap, r.crossing_time, double(r.steps)});
  }
  ctx.checks.le("comparison", worst, tol, "max over pairs and time of max(u - v, 0)");
  ctx.write("compare.csv", t.text());
}

void run_barrier(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  EvolutionConfig cfg = model_config(p, make_model(p));
  const double tol = p.real("barrier.tolerance"), eps = p.real("barrier.eps");
  const double horizon = p.real("barrier.horizon");
  cfg.final_time = horizon;
  const GridFunction u0 = make_initial(p, g, ctx.rng);
  ctx.log("initial trace check");
  const InitialTraceReport tr =
      initial_trace_check(u0, cfg, p.point("barrier.xi"), eps, horizon, tol);
  const BarrierParameters& bp = tr.params;
  const double k = std::max({std::abs(u0.max()), std::abs(u0.min()), eps});
  CheckList& c = ctx.checks;
  const double a_t = tr.delta / (8 * bp.mu), q_t = 8 * k / tr.delta;
  c.within("proof-constant-a", bp.a, a_t, 1e-12 * a_t, "A = delta / (8 mu)");
  c.within("proof-constant-q", bp.q, q_t, 1e-12 * q_t, "q = 8K / delta");
  double lb = kInf;
  for (const auto& [m, v] : bp.lower_bounds) lb = std::min(lb, v - 2 * k);
  c.ge("conjugate-lower-bound", lb, 0.0, "min sampled W* - 2K over |x| >= delta and m >= m0");
  c.le("initial-trace", std::max({tr.upper_excess, tr.lower_excess, tr.barrier_excess}), tol,
       "max excess of u over the upper barrier and of the lower barrier over u");

  ctx.log("barrier residual audit");
  const BarrierFamily b(*cfg.wm, bp.a, bp.q);
  const Vec2 center = p.point("barrier.center");
  const BarrierResidualReport br = barrier_residual_check(b, tr.beta, center, g, cfg, tol);
  c.ge("barrier-supersolution", br.analytic, -tol, "min over nodes of beta + F(grad W*, L_m W*)");
  c.le("barrier-evolved", br.evolved_excess, tol, "max of the evolved barrier minus beta t + W*");

  Table t({"quantity", "value"});
  const std::vector<std::pair<std::string, double>> rows{
      {"m0", bp.m0},           {"A", bp.a},
      {"q", bp.q},             {"mu", bp.mu},
      {"K", k},                {"delta", tr.delta},
      {"beta", tr.beta},       {"upper_excess", tr.upper_excess},
      {"lower_excess", tr.lower_excess}, {"barrier_excess", tr.barrier_excess},
      {"residual_analytic", br.analytic}, {"residual_discrete", br.discrete},
      {"evolved_excess", br.evolved_excess}};
  for (const auto& [name, v] : rows) t.row_text({name, format_double(v)});
  ctx.write("barrier.csv", t.text());

  // W* and L_m W* along the grid row through the audit center.
  Table prof({"x", "y", "w_star", "gradient_x", "gradient_y", "operator"});
  const int n = g.resolution();
  const int row = g.dim() == 1 ? 0 : g.wrap(int(std::lround(center.y * n)));
  for (int i = 0; i < n; ++i) {
    const Vec2 x = g.position(g.index(i, row));
    const Vec2 y = torus_difference(x, center, g.dim());
    const Jet j = b.conjugate(y);
    prof.row({x.x, x.y, j.value, j.gradient.x, j.gradient.y, b.operator_value(y)});
  }
  ctx.write("barrier_profile.csv", prof.text());
  ctx.diagnostics["residual_discrete"] = br.discrete;
}

void run_viscosity(Context& ctx) {
  const Params& p = ctx.p;
  const Grid g = p.grid();
  const AnisotropyPtr w = make_model(p);
  EvolutionConfig cfg = evolution_config(p, w);
  const double t_hat = p.real("viscosity.time"), h = g.spacing(), s = p.real("initial.slope");
  if (std::find(cfg.probe_times.begin(), cfg.probe_times.end(), t_hat) == cfg.probe_times.end())
    cfg.probe_times.push_back(t_hat);
  const GridFunction u0 = make_initial(p, g, ctx.rng);
  ctx.log("evolving to T = " + format_double(cfg.final_time));
  const EvolutionTrace tr = evolve(u0, cfg);
  trace_diagnostics(ctx, tr);
  ctx.write("series.csv", series_csv(tr));
  ctx.grid("u_test_time.grid", tr.at(t_hat).u, t_hat);
  const int n = g.resolution();
  const double given = p.real("viscosity.tolerance");
  CheckList& c = ctx.checks;

  if (p.str("viscosity.mode") == "conventional") {
    // On the rising slope u = s x + c t exactly.
    const double drive = cfg.speed.driving(), big = p.real("viscosity.penalty");
    const std::size_t node = g.index(p.integer("viscosity.node") >= 0 ? p.integer("viscosity.node") : n / 4);
    const double xh = g.position(node).x;
    const double shift = tr.at(t_hat).u[node] - s * xh - drive * t_hat;
    TestFunction phi;
    phi.value = [=](Vec2 x, double t) {
      return s * x.x + drive * t + big * ((x.x - xh) * (x.x - xh) + (t - t_hat) * (t - t_hat)) + shift;
    };
    phi.gradient = [=](Vec2 x, double) { return Vec2{s + 2 * big * (x.x - xh), 0.0}; };
    phi.hessian = [=](Vec2, double) { return Sym2{2 * big, 0, 0}; };
    phi.time_derivative = [=](Vec2, double t) { return drive + 2 * big * (t - t_hat); };
    const ResidualReport r = conventional_test_residual(tr, cfg.speed, *w, phi, node, t_hat);
    c.truth("touching", r.precondition_met, r.reason);
    c.le("conventional-residual", r.precondition_met ? std::abs(r.residual) : kInf,
         given > 0 ? given : 5 * h, "|phi_t + F(grad phi, k(grad phi, hess phi))|");
    ctx.diagnostics["node"] = node;
  } else {
    const GridFunction& u = tr.at(t_hat).u;
    const double eta = p.real("viscosity.eta") > 0 ? p.real("viscosity.eta") : 12 * h;
    const double top = u.max(), band = p.real("viscosity.band");
    const Mask facet = Mask::where(u, [&](double v) { return v >= top - band; });
    const GridFunction dist = distance_to(rho_neighborhood(facet, eta + h));
    GridFunction psi(g);
    for (std::size_t k = 0; k < g.size(); ++k) psi[k] = -0.5 * s * std::min(dist[k], 0.1);
    const SupportFunctionCertificate cert{psi, pair_of(psi), GridVectorField(g), 0.1};
    // Peak law of the tent: level s/2 - sqrt(2 s t), facet half-length sqrt(2t/s).
    const double g_slope = -1.0 / std::sqrt(2 * t_hat / s);
    const double g_curv = std::sqrt(2 * s) / (2 * std::pow(t_hat, 1.5));
    const std::size_t node = g.index(p.integer("viscosity.node") >= 0 ? p.integer("viscosity.node") : n / 2);
    const ResidualReport r =
        faceted_test_residual(tr, cfg.speed, *w, cert, g_slope, node, t_hat, eta, g_curv);
    c.truth("touching", r.precondition_met, r.reason);
    c.le("faceted-residual", r.precondition_met ? r.residual : kInf, given > 0 ? given : 1e-6,
         "g'(t) + F(0, essinf of the curvature of psi)");
    ctx.grid("test_function.grid", psi, t_hat);
    ctx.diagnostics["node"] = node;
    ctx.diagnostics["ball_radius"] = r.delta;
    ctx.diagnostics["facet_nodes"] = facet.count();
  }
}

void dispatch(Context& ctx) {
  const std::string& k = ctx.p.kind();
  if (k == "anisotropy-check") run_anisotropy(ctx);
  else if (k == "resolvent") run_resolvent(ctx);
  else if (k == "curvature") run_curvature(ctx);
  else if (k == "monotonicity") run_monotonicity(ctx);
  else if (k == "evolve") run_evolve(ctx);
  else if (k == "compare") run_compare(ctx);
  else if (k == "barrier") run_barrier(ctx);
  else run_viscosity(ctx);
}

// ---------------------------------------------------------------------------
// Output

// JSON text with every float printed by format_double.
void dump_json(const json& j, std::string& out, int indent) {
  const std::string pad(indent + 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump_json(it.value(), out, indent + 2);
      }
      out += "\n" + std::string(indent, ' ') + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_json(j[i], out, indent + 2);
      }
      out += "\n" + std::string(indent, ' ') + "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : (v > 0 ? "\"inf\"" : v < 0 ? "\"-inf\"" : "\"nan\"");
      return;
    }
    default:
      out += j.dump();
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

void clear_outputs(const fs::path& dir) {
  fs::remove_all(dir / "snapshots");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    const auto ext = e.path().extension().string();
    if (ext == ".grid" || ext == ".csv" || name == "manifest.json" || name == "timing.json")
      fs::remove(e.path());
  }
}

json check_json(const CheckResult& c) {
  json j;
  j["name"] = c.name;
  j["relation"] = c.relation;
  j["measured"] = c.measured;
  j["target"] = c.target;
  j["bound"] = c.bound;
  j["margin"] = c.margin;
  j["passed"] = c.passed;
  j["note"] = c.note;
  return j;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

std::vector<std::string> declared_checks(const Config& validated) {
  return plan_checks(Params(validated));
}

RunResult run_scenario(const Config& cfg, const RunOptions& options) {
  RunResult res;
  Config input = cfg;
  if (options.seed) input.set("seed", std::to_string(*options.seed));
  std::optional<Params> params;
  try {
    params.emplace(validate(input));
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.status = "config_error";
    res.error = e.what();
    return res;
  }
  const Params& p = *params;
  res.out_dir = options.out_dir.value_or(p.str("output.dir"));
  const fs::path dir(res.out_dir);
  try {
    fs::create_directories(dir);
    clear_outputs(dir);
  } catch (const fs::filesystem_error& e) {
    res.exit_code = 2;
    res.status = "config_error";
    res.error = std::string("cannot prepare output directory: ") + e.what();
    return res;
  }

  Context ctx{p, dir, options.quiet, std::mt19937_64(p.u64("seed")), {}, json::object(), {}};
  const std::vector<std::string> declared = plan_checks(p);
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  ctx.log("scenario " + p.kind() + " -> " + dir.string());
  try {
    dispatch(ctx);
    std::vector<std::string> ran;
    for (const auto& c : ctx.checks.results()) ran.push_back(c.name);
    if (ran != declared) throw std::logic_error("executed checks differ from the declared list");
    const bool ok = std::all_of(ctx.checks.results().begin(), ctx.checks.results().end(),
                                [](const CheckResult& c) { return c.passed; });
    res.exit_code = ok ? 0 : 4;
    res.status = ok ? "passed" : "check_failed";
  } catch (const CflViolation& e) {
    res.exit_code = 3;
    res.status = "cfl_violation";
    res.error = e.what();
  } catch (const NumericalFailure& e) {
    res.exit_code = 3;
    res.status = "numerical_failure";
    res.error = e.what();
  } catch (const ToleranceError& e) {
    res.exit_code = 3;
    res.status = "numerical_failure";
    res.error = std::string(e.what()) + " (achieved " + format_double(e.achieved()) + ")";
  } catch (const ConfigError& e) {
    res.exit_code = 2;
    res.status = "config_error";
    res.error = e.what();
  } catch (const Error& e) {
    // Domain and precondition failures of otherwise well-formed parameters.
    res.exit_code = 2;
    res.status = "invalid_parameters";
    res.error = e.what();
  } catch (const std::exception& e) {
    res.exit_code = 3;
    res.status = "runtime_failure";
    res.error = e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.checks = ctx.checks.results();
  for (const auto& c : res.checks) {
    ctx.log(std::string(c.passed ? "PASS " : "FAIL ") + c.name + " measured=" +
            format_double(c.measured) + " " + c.relation + " " +
            format_double(c.relation == "within" ? c.target : c.bound) +
            (c.relation == "within" ? " +- " + format_double(c.bound) : "") +
            " margin=" + format_double(c.margin));
  }
  if (!res.error.empty()) ctx.log("error: " + res.error);

  json m;
  m["tool"] = "facetflow";
  m["version"] = version();
  m["scenario"] = p.kind();
  m["seed"] = p.u64("seed");
  m["status"] = res.status;
  m["exit_code"] = res.exit_code;
  m["error"] = res.error.empty() ? json(nullptr) : json(res.error);
  json c = json::object();
  for (const auto& [k, v] : p.config().entries()) c[k] = v;
  m["config"] = c;
  m["declared_checks"] = declared;
  json checks = json::array();
  for (const auto& r : res.checks) checks.push_back(check_json(r));
  m["checks"] = checks;
  std::size_t passed = 0;
  for (const auto& r : res.checks) passed += r.passed;
  m["summary"] = {{"declared", declared.size()},
                  {"executed", res.checks.size()},
                  {"passed", passed},
                  {"failed", res.checks.size() - passed}};
  m["diagnostics"] = ctx.diagnostics;
  std::sort(ctx.artifacts.begin(), ctx.artifacts.end());
  m["artifacts"] = ctx.artifacts;
  m["timing_file"] = "timing.json";
  res.artifacts = ctx.artifacts;
  try {
    std::string text;
    dump_json(m, text, 0);
    write_file(dir / "manifest.json", text + "\n");
    json t;
    t["started_utc"] = started;
    t["wall_clock_seconds"] = seconds;
    text.clear();
    dump_json(t, text, 0);
    write_file(dir / "timing.json", text + "\n");
  } catch (const std::exception& e) {
    res.exit_code = 3;
    res.status = "runtime_failure";
    res.error = e.what();
  }
  ctx.log("status " + res.status + " (exit " + std::to_string(res.exit_code) + ")");
  return res;
}

RunResult run_scenario_file(const std::string& path, const RunOptions& options) {
  Config cfg;
  try {
    cfg = Config::load(path);
  } catch (const ConfigError& e) {
    RunResult res;
    res.exit_code = 2;
    res.status = "config_error";
    res.error = e.what();
    return res;
  }
  return run_scenario(cfg, options);
}

}  // namespace facetflow
