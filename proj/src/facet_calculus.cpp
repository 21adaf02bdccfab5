#include "facetflow/facet_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "facetflow/kernels.hpp"

namespace facetflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

kernels::Shape shape_of(const Grid& g) { return {g.dim(), g.resolution()}; }

// Squared distance in grid units to the nearest node of a; +inf if empty.
std::vector<double> squared_distance_cells(const Mask& a) {
  std::vector<double> out(a.size(), kInf);
  if (a.empty()) return out;
  kernels::omp::squared_edt(shape_of(a.grid()), a.bits(), out);
  return out;
}

Mask dilation(const Mask& a, double rho) {
  const double r = rho / a.grid().spacing();
  const double r2 = r * r * (1.0 + 1e-12) + 1e-12;
  const auto d2 = squared_distance_cells(a);
  Mask out(a.grid());
  for (std::size_t k = 0; k < d2.size(); ++k) out.set(k, d2[k] <= r2);
  return out;
}

// Smooth step, 0 for t <= 0 and 1 for t >= 1.
double smooth_step(double t) {
  auto f = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = f(t);
  return a / (a + f(1.0 - t));
}

// 1 on [0, delta], 0 off (-delta, 2 delta).
double plateau(double s, double delta) {
  if (s < 0.0) return smooth_step((s + delta) / delta);
  if (s > delta) return smooth_step((2.0 * delta - s) / delta);
  return 1.0;
}

// Rolling-ball test: A and A^c are unions of closed r-balls up to grid slack.
bool rolls(const Mask& a, double r) {
  const double slack = 1.5 * a.grid().spacing();
  for (const Mask& s : {a, a.complement()}) {
    const Mask opened = rho_neighborhood(rho_neighborhood(s, -r), r);
    if (!s.subset_of(rho_neighborhood(opened, slack))) return false;
  }
  return true;
}

// Largest rolling-ball radius of the boundary of a in [floor, cap]; cap when
// there is no boundary.
double smoothness_radius(const Mask& a, double floor, double cap) {
  if (a.empty() || a.count() == a.size()) return cap;
  if (!rolls(a, floor)) return floor;
  double lo = floor, hi = floor;
  while (hi < cap && rolls(a, std::min(2.0 * hi, cap))) lo = hi = std::min(2.0 * hi, cap);
  if (hi >= cap) return cap;
  hi = std::min(2.0 * hi, cap);
  const double h = a.grid().spacing();
  while (hi - lo > 0.5 * h) {
    const double mid = 0.5 * (lo + hi);
    (rolls(a, mid) ? lo : hi) = mid;
  }
  return lo;
}

// grad W(v), or the zero vector (inside the Wulff set) for v = 0.
Vec2 cahn_hoffman(const Anisotropy& w, Vec2 v) {
  if (v.x == 0.0 && v.y == 0.0) return {};
  return w.gradient(v);
}

}  // namespace

Mask::Mask(const Grid& grid, std::vector<std::uint8_t> bits) : grid_(grid), bits_(std::move(bits)) {
  if (bits_.size() != grid_.size()) throw GridMismatch("mask size does not match grid");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const {
  return std::size_t(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask Mask::complement() const {
  Mask out(grid_);
  for (std::size_t k = 0; k < bits_.size(); ++k) out.bits_[k] = bits_[k] ^ 1;
  return out;
}

Mask Mask::operator&(const Mask& o) const {
  require_same_grid(grid_, o.grid_, "mask intersection");
  Mask out(grid_);
  for (std::size_t k = 0; k < bits_.size(); ++k) out.bits_[k] = bits_[k] & o.bits_[k];
  return out;
}

Mask Mask::operator|(const Mask& o) const {
  require_same_grid(grid_, o.grid_, "mask union");
  Mask out(grid_);
  for (std::size_t k = 0; k < bits_.size(); ++k) out.bits_[k] = bits_[k] | o.bits_[k];
  return out;
}

bool Mask::subset_of(const Mask& o) const {
  require_same_grid(grid_, o.grid_, "mask inclusion");
  for (std::size_t k = 0; k < bits_.size(); ++k) {
    if (bits_[k] && !o.bits_[k]) return false;
  }
  return true;
}

GridFunction distance_to(const Mask& a) {
  const auto d2 = squared_distance_cells(a);
  GridFunction out(a.grid());
  const double h = a.grid().spacing();
  for (std::size_t k = 0; k < d2.size(); ++k) out[k] = std::sqrt(d2[k]) * h;
  return out;
}

Mask rho_neighborhood(const Mask& a, double rho) {
  if (!std::isfinite(rho)) throw DomainError("neighborhood radius must be finite");
  if (rho == 0.0) return a;
  if (rho > 0.0) return dilation(a, rho);
  return dilation(a.complement(), -rho).complement();
}

SignedDistance signed_distance(const Mask& a) {
  SignedDistance out{GridFunction(a.grid()), false};
  const std::size_t c = a.count();
  if (c == 0 || c == a.size()) {
    out.values = GridFunction(a.grid(), c == 0 ? 1.0 : -1.0);
    out.saturated = true;
    return out;
  }
  out.values = distance_to(a) - distance_to(a.complement());
  return out;
}

PairOfSets::PairOfSets(Mask minus, Mask plus) : minus_(std::move(minus)), plus_(std::move(plus)) {
  require_same_grid(minus_.grid(), plus_.grid(), "pair of sets");
  if (!(minus_ & plus_).empty()) throw PreconditionError("pair sets must be disjoint");
}

PairOfSets pair_of(const GridFunction& u) {
  return PairOfSets(Mask::where(u, [](double v) { return v < 0.0; }),
                    Mask::where(u, [](double v) { return v > 0.0; }));
}

bool pair_leq(const PairOfSets& p, const PairOfSets& q) {
  return p.plus().subset_of(q.plus()) && q.minus().subset_of(p.minus());
}

PairOfSets pair_reverse(const PairOfSets& p) { return PairOfSets(p.plus(), p.minus()); }

PairOfSets pair_nbhd(const PairOfSets& p, double rho) {
  return PairOfSets(rho_neighborhood(p.minus(), -rho), rho_neighborhood(p.plus(), rho));
}

double set_distance(const Mask& a, const Mask& b) {
  require_same_grid(a.grid(), b.grid(), "set distance");
  if (a.empty() || b.empty()) return kInf;
  const auto d2 = squared_distance_cells(a);
  double best = kInf;
  for (std::size_t k = 0; k < d2.size(); ++k) {
    if (b[k]) best = std::min(best, d2[k]);
  }
  return std::sqrt(best) * a.grid().spacing();
}

PairOfSets smooth_pair_between(const PairOfSets& p, double rho1, double rho2) {
  const Grid& g = p.grid();
  const double h = g.spacing();
  if (!(rho1 >= 0.0 && rho2 > rho1)) throw DomainError("smooth pair needs 0 <= rho1 < rho2");
  const double delta = (rho2 - rho1) / 3.0;
  if (delta < h * (1.0 - 1e-12)) {
    throw DomainError("smooth pair infeasible at grid resolution: rho2 - rho1 < 3h");
  }
  const double r = 0.45 * delta;

  Mask plus(g);
  if (!p.plus().empty()) {
    const GridFunction f = mollify(distance_to(p.plus()), r);
    plus = Mask::where(f, [&](double v) { return v < rho1 + 0.5 * delta; });
  }
  Mask minus(g);
  const Mask outside = p.minus().complement();
  if (outside.empty()) {
    minus = Mask(g, true);
  } else if (!p.minus().empty()) {
    const GridFunction f = mollify(distance_to(outside), r);
    minus = Mask::where(f, [&](double v) { return v > rho2 - 0.5 * delta; });
  }
  return PairOfSets(std::move(minus), std::move(plus));
}

SupportFunctionCertificate support_from_smooth_pair(const PairOfSets& gp, const Anisotropy& w) {
  const Grid& g = gp.grid();
  if (w.dim() != g.dim()) throw DomainError("anisotropy and grid dimensions differ");
  const double h = g.spacing();
  const double sep = set_distance(gp.minus(), gp.plus());
  if (sep < 6.0 * h * (1.0 - 1e-12)) {
    throw PreconditionError("support construction needs dist(G-, G+) >= 6h, got " +
                            std::to_string(sep));
  }
  const double cap = 0.75;
  const double radius = std::min(smoothness_radius(gp.plus(), 6.0 * h, cap),
                                 smoothness_radius(gp.minus(), 6.0 * h, cap));
  const double delta = std::min({radius, sep, cap}) / 3.0;

  // d_{G^c} = dist(., G^c) - dist(., G): positive inside G.
  const GridFunction sp = -1.0 * signed_distance(gp.plus()).values;
  const GridFunction sm = -1.0 * signed_distance(gp.minus()).values;

  GridFunction psi(g);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    psi[k] = std::clamp(sp[k], 0.0, delta) - std::clamp(sm[k], 0.0, delta);
  }

  const GridVectorField dpsi = gradient_fd(psi);
  const GridVectorField dsp = gradient_fd(sp);
  const GridVectorField dsm = gradient_fd(sm);
  const GridVectorField msp = gradient_fd(mollify(sp, 2.0 * h));
  const GridVectorField msm = gradient_fd(mollify(sm, 2.0 * h));
  auto direction = [](const GridVectorField& raw, const GridVectorField& smooth, std::size_t k) {
    const Vec2 v = raw[k];
    if (norm(v) >= 0.5) return v;
    const Vec2 s = smooth[k];
    return norm(s) >= 0.5 ? s : Vec2{};
  };

  GridVectorField z(g);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const Vec2 gk = dpsi[k];
    if (gk.x != 0.0 || gk.y != 0.0) {
      z.set(k, w.gradient(gk));
      continue;
    }
    Vec2 zk;
    const double tp = plateau(sp[k], delta);
    if (tp > 0.0) zk += tp * cahn_hoffman(w, direction(dsp, msp, k));
    const double tm = plateau(sm[k], delta);
    if (tm > 0.0) zk += tm * cahn_hoffman(w, -direction(dsm, msm, k));
    z.set(k, zk);
  }
  return {std::move(psi), gp, std::move(z), delta};
}

AdmissibilityReport admissibility_check(const SupportFunctionCertificate& cert, const Anisotropy& w,
                                        double tol) {
  const Grid& g = cert.psi.grid();
  require_same_grid(g, cert.z.grid(), "certificate field");
  require_same_grid(g, cert.pair.grid(), "certificate pair");
  AdmissibilityReport rep;
  rep.nodes = g.size();
  const GridVectorField dpsi = gradient_fd(cert.psi);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double v = cert.psi[k];
    const bool ok = cert.pair.plus()[k] ? v > 0.0 : cert.pair.minus()[k] ? v < 0.0 : v == 0.0;
    if (!ok) rep.sign_pattern_ok = false;

    const Vec2 p = dpsi[k];
    const Vec2 zk = cert.z[k];
    double defect;
    if (p.x == 0.0 && p.y == 0.0) {
      defect = std::max(0.0, w.gauge(zk) - 1.0);
    } else {
      defect = norm(zk - w.gradient(p));
    }
    if (!(defect <= tol)) {
      ++rep.violations;
      if (!(defect <= rep.worst_defect)) {
        rep.worst_defect = std::isfinite(defect) ? defect : kInf;
        rep.worst_node = k;
      }
    }
  }
  rep.violation_fraction = double(rep.violations) / double(rep.nodes);
  const GridFunction div = divergence_fd(cert.z);
  rep.divergence_finite = div.all_finite();
  for (std::size_t k = 0; k < div.size(); ++k) {
    rep.max_divergence = std::max(rep.max_divergence, std::abs(div[k]));
  }
  return rep;
}

GridFunction rescale_parts(const GridFunction& psi, double alpha, double beta) {
  GridFunction out(psi.grid());
  for (std::size_t k = 0; k < psi.size(); ++k) {
    out[k] = psi[k] > 0.0 ? alpha * psi[k] : beta * psi[k];
  }
  return out;
}

SupportFunctionCertificate ordered_support_function(
    const GridFunction& theta, const PairOfSets& hset, const Anisotropy& w,
    const std::optional<SupportFunctionCertificate>& hat) {
  const Grid& g = theta.grid();
  require_same_grid(g, hset.grid(), "ordered support function");
  const PairOfSets gp = pair_of(theta);
  if (!pair_leq(gp, pair_nbhd(hset, -2.0 * g.spacing()))) {
    throw PreconditionError("pair(theta) is not below the 2h-erosion of H");
  }
  SupportFunctionCertificate base = hat ? *hat : support_from_smooth_pair(hset, w);
  require_same_grid(g, base.psi.grid(), "support certificate");
  if (!(pair_of(base.psi) == hset)) throw PreconditionError("certificate does not support H");

  // A few ulps of headroom keep theta <= psi exact after the rescaling.
  constexpr double guard = 1.0 + 1e-14;
  double alpha = 1.0;
  if (!gp.plus().empty()) {
    double lo = kInf;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (gp.plus()[k]) lo = std::min(lo, base.psi[k]);
    }
    alpha = theta.max() / lo * guard;
  }
  double beta = 1.0;
  if (!hset.minus().empty()) {
    double hi = -kInf;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (hset.minus()[k]) hi = std::max(hi, theta[k]);
    }
    beta = hi / base.psi.min() / guard;
  }
  if (!(alpha > 0.0 && beta > 0.0 && std::isfinite(alpha) && std::isfinite(beta))) {
    throw NumericalFailure("ordered support scaling is not positive and finite");
  }
  base.psi = rescale_parts(base.psi, alpha, beta);
  return base;
}

}  // namespace facetflow
