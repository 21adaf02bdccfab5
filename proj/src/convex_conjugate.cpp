#include "facetflow/convex_conjugate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace facetflow {

namespace {

constexpr double kPi = std::numbers::pi;

struct LineResult {
  std::vector<double> value;
  std::vector<int> argmax;
  std::vector<std::uint8_t> outward;
  bool empty = true;
};

// max_i x_a p_i - f_i over finite entries of one line, for ascending
// uniformly spaced queries x_a.
void transform_line(const std::vector<double>& f, const std::vector<std::uint8_t>& finite,
                    double p_lo, double dp, double x_lo, double dx, int nx, LineResult& out) {
  const int n = int(f.size());
  std::vector<int> hull;
  hull.reserve(n);
  auto slope = [&](int a, int b) { return (f[b] - f[a]) / ((b - a) * dp); };
  for (int i = 0; i < n; ++i) {
    if (!finite[i]) continue;
    while (hull.size() >= 2 && slope(hull[hull.size() - 2], hull.back()) >= slope(hull.back(), i))
      hull.pop_back();
    hull.push_back(i);
  }
  out.value.assign(nx, 0.0);
  out.argmax.assign(nx, -1);
  out.outward.assign(nx, 0);
  out.empty = hull.empty();
  if (hull.empty()) return;
  const int h = int(hull.size());
  std::size_t j = 0;
  for (int a = 0; a < nx; ++a) {
    const double x = x_lo + a * dx;
    while (int(j) + 1 < h && slope(hull[j], hull[j + 1]) <= x) ++j;
    const int i = hull[j];
    out.value[a] = x * (p_lo + i * dp) - f[i];
    out.argmax[a] = i;
    if (h >= 2) {
      if (int(j) == h - 1 && i == n - 1 && x > slope(hull[h - 2], hull[h - 1])) out.outward[a] = 1;
      if (j == 0 && i == 0 && x < slope(hull[0], hull[1])) out.outward[a] = 1;
    }
  }
}

Sym2 cap_hessian(Vec2 u, int dim) {
  const double d = 1.0 - dot(u, u);
  Sym2 h{2.0 / d + 4.0 * u.x * u.x / (d * d), 4.0 * u.x * u.y / (d * d),
         2.0 / d + 4.0 * u.y * u.y / (d * d)};
  if (dim == 1) h.xy = h.yy = 0.0;
  return h;
}

Vec2 solve_sym(const Sym2& h, Vec2 b, int dim) {
  if (dim == 1) return {b.x / h.xx, 0.0};
  return inverse(h).apply(b);
}

// Golden-section maximisation of fn on [lo, hi].
template <class Fn>
double golden_max(Fn&& fn, double lo, double hi, int iters = 80) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = fn(c), fd = fn(d);
  for (int it = 0; it < iters; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = fn(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = fn(d);
    }
  }
  return std::max(fc, fd);
}

// sup over the circle |p| = r (two points in 1D) of fn(p).
template <class Fn>
double sphere_sup(Fn&& fn, int dim, double r, int dirs) {
  if (dim == 1) return std::max(fn(Vec2{r, 0.0}), fn(Vec2{-r, 0.0}));
  auto at = [&](double t) { return fn(Vec2{r * std::cos(t), r * std::sin(t)}); };
  const double dt = 2.0 * kPi / dirs;
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < dirs; ++k) {
    const double v = at(k * dt);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  return std::max(best_val, golden_max(at, (best - 1) * dt, (best + 1) * dt));
}

}  // namespace

// ---------------------------------------------------------------------------

SampledConvexFunction::SampledConvexFunction(int dim, double lo, double hi, int resolution)
    : dim_(dim), lo_(lo), hi_(hi), n_(resolution) {
  if (dim != 1 && dim != 2) throw DomainError("sampled function dimension must be 1 or 2");
  if (resolution < 2 || !(hi > lo)) throw DomainError("sampled function box is degenerate");
  const std::size_t count = dim == 1 ? std::size_t(n_) : std::size_t(n_) * n_;
  values_.assign(count, 0.0);
  infinite_.assign(count, 0);
}

Vec2 SampledConvexFunction::node(std::size_t k) const {
  const int i = int(k % n_);
  const int j = int(k / n_);
  return {lo_ + i * spacing(), dim_ == 1 ? 0.0 : lo_ + j * spacing()};
}

std::size_t SampledConvexFunction::finite_count() const {
  return std::size_t(std::count(infinite_.begin(), infinite_.end(), 0));
}

std::optional<double> SampledConvexFunction::interpolate(Vec2 x) const {
  const double sp = spacing();
  const double slack = 1e-12 * (hi_ - lo_);
  auto locate = [&](double c, int& i, double& t) {
    if (c < lo_ - slack || c > hi_ + slack) return false;
    const double s = std::clamp((c - lo_) / sp, 0.0, double(n_ - 1));
    i = std::min(int(std::floor(s)), n_ - 2);
    t = s - i;
    return true;
  };
  int i = 0, j = 0;
  double tx = 0.0, ty = 0.0;
  if (!locate(x.x, i, tx)) return std::nullopt;
  if (dim_ == 1) {
    if (infinite_[i] || infinite_[i + 1]) return std::nullopt;
    return (1.0 - tx) * values_[i] + tx * values_[i + 1];
  }
  if (!locate(x.y, j, ty)) return std::nullopt;
  const std::size_t k00 = index(i, j), k10 = index(i + 1, j), k01 = index(i, j + 1),
                    k11 = index(i + 1, j + 1);
  if (infinite_[k00] || infinite_[k10] || infinite_[k01] || infinite_[k11]) return std::nullopt;
  return (1.0 - ty) * ((1.0 - tx) * values_[k00] + tx * values_[k10]) +
         ty * ((1.0 - tx) * values_[k01] + tx * values_[k11]);
}

SampledConvexFunction legendre_transform(const SampledConvexFunction& f, double lo, double hi,
                                         int resolution) {
  if (f.finite_count() == 0) throw DomainError("Legendre transform of an all-infinite function");
  SampledConvexFunction out(f.dim(), lo, hi, resolution);
  const int n = f.resolution();
  const double dp = f.spacing();
  const double dx = out.spacing();
  const int nx = resolution;
  if (f.dim() == 1) {
    std::vector<double> vals(n);
    std::vector<std::uint8_t> fin(n);
    for (int i = 0; i < n; ++i) {
      fin[i] = f.finite(i);
      vals[i] = f.value(i);
    }
    LineResult r;
    transform_line(vals, fin, f.lo(), dp, lo, dx, nx, r);
    for (int a = 0; a < nx; ++a) {
      if (r.outward[a]) {
        out.set_infinite(a);
      } else {
        out.set(a, r.value[a]);
      }
    }
    return out;
  }
  // Pass 1 along p1 for every row p2: h(x_a, p2_j).
  std::vector<LineResult> rows(n);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    std::vector<double> vals(n);
    std::vector<std::uint8_t> fin(n);
    for (int i = 0; i < n; ++i) {
      const std::size_t k = f.index(i, j);
      fin[i] = f.finite(k);
      vals[i] = f.value(k);
    }
    transform_line(vals, fin, f.lo(), dp, lo, dx, nx, rows[j]);
  }
  // Pass 2 along p2 for every x_a: max_j y p2_j + h(x_a, p2_j).
#pragma omp parallel for schedule(static)
  for (int a = 0; a < nx; ++a) {
    std::vector<double> g(n);
    std::vector<std::uint8_t> fin(n);
    for (int j = 0; j < n; ++j) {
      fin[j] = !rows[j].empty;
      g[j] = fin[j] ? -rows[j].value[a] : 0.0;
    }
    LineResult r;
    transform_line(g, fin, f.lo(), dp, lo, dx, nx, r);
    for (int b = 0; b < nx; ++b) {
      const std::size_t k = out.index(a, b);
      const int js = r.argmax[b];
      if (r.outward[b] || rows[js].outward[a]) {
        out.set_infinite(k);
      } else {
        out.set(k, r.value[b]);
      }
    }
  }
  return out;
}

std::optional<double> cap_function(Vec2 p, int dim) {
  if (dim == 1) p.y = 0.0;
  const double r2 = dot(p, p);
  if (r2 >= 1.0) return std::nullopt;
  return -std::log1p(-r2);
}

// ---------------------------------------------------------------------------

BarrierFamily::BarrierFamily(MollifiedAnisotropy wm, double a, double q)
    : wm_(std::move(wm)), a_(a), q_(q) {
  if (!(a > 0.0) || !(q > 0.0)) throw DomainError("barrier needs positive A and q");
  wm0_ = wm_.value({0.0, 0.0});
}

std::optional<double> BarrierFamily::primal(Vec2 p) const {
  const auto cap = cap_function((1.0 / q_) * p, dim());
  if (!cap) return std::nullopt;
  return a_ * (wm_.value(p) + q_ * *cap - wm0_);
}

Jet BarrierFamily::primal_jet(Vec2 p) const {
  if (dim() == 1) p.y = 0.0;
  const Vec2 u = (1.0 / q_) * p;
  const double d = 1.0 - dot(u, u);
  if (!(d > 0.0)) throw DomainError("barrier primal evaluated outside the cap ball");
  const Jet j = wm_.jet(p);
  Jet out;
  out.value = a_ * (j.value - q_ * std::log(d) - wm0_);
  out.gradient = a_ * (j.gradient + (2.0 / d) * u);
  if (dim() == 1) out.gradient.y = 0.0;
  out.hessian = a_ * (j.hessian + (1.0 / q_) * cap_hessian(u, dim()));
  return out;
}

Vec2 BarrierFamily::solve(Vec2 x) const {
  if (dim() == 1) x.y = 0.0;
  Vec2 p{0.0, 0.0};
  Jet j = primal_jet(p);
  double phi = j.value - dot(x, p);
  const double gtol = 1e-12 * (1.0 + norm(x)) * std::max(1.0, a_);
  for (int it = 0; it < 200; ++it) {
    const Vec2 g = j.gradient - x;
    if (norm(g) <= gtol) return p;
    const Vec2 d = -1.0 * solve_sym(j.hessian, g, dim());
    const double slope = dot(g, d);
    double t = 1.0;
    // Stay inside the cap ball.
    while (norm(p + t * d) >= q_ * (1.0 - 1e-15)) t *= 0.5;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      const Vec2 trial = p + t * d;
      const Jet jt = primal_jet(trial);
      const double pt = jt.value - dot(x, trial);
      if (pt <= phi + 1e-4 * t * slope || norm(jt.gradient - x) < norm(g) * (1.0 - 1e-4 * t)) {
        p = trial;
        j = jt;
        phi = pt;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (norm(g) <= 1e3 * gtol) return p;
      throw NumericalFailure("barrier conjugate line search failed at x = (" +
                             std::to_string(x.x) + ", " + std::to_string(x.y) + ")");
    }
    if (norm(t * d) <= 1e-15 * (1.0 + norm(p))) return p;
  }
  return p;
}

Vec2 BarrierFamily::conjugate_gradient(Vec2 x) const { return solve(x); }

Jet BarrierFamily::conjugate(Vec2 x) const {
  if (dim() == 1) x.y = 0.0;
  const Vec2 p = solve(x);
  const Jet j = primal_jet(p);
  Jet out;
  out.value = dot(x, p) - j.value;
  out.gradient = p;
  if (dim() == 1) {
    out.hessian = {1.0 / j.hessian.xx, 0.0, 0.0};
  } else {
    out.hessian = inverse(j.hessian);
  }
  return out;
}

double BarrierFamily::operator_value(Vec2 x) const {
  const Jet c = conjugate(x);
  const Sym2 hm = wm_.hessian(c.gradient);
  if (dim() == 1) return hm.xx * c.hessian.xx;
  return trace_product(hm, c.hessian);
}

void BarrierFamily::build_tables(int p_resolution, double x_extent, int x_resolution) {
  primal_table_ = SampledConvexFunction::sample(dim(), -q_, q_, p_resolution, [&](Vec2 p) {
    const auto v = primal(p);
    return v ? *v : std::numeric_limits<double>::infinity();
  });
  conj_table_ = legendre_transform(*primal_table_, -x_extent, x_extent, x_resolution);
}

// ---------------------------------------------------------------------------

double beta_aq(const SpeedLaw& f, int dim, double a, double q) {
  if (!(a > 0.0) || !(q > 0.0)) throw DomainError("beta needs positive A and q");
  const double xi_max = dim / a;
  const int radii = 65, xis = 65, dirs = dim == 1 ? 2 : 32;
  auto eval = [&](double r, double t, double xi) {
    return std::abs(f(Vec2{r * std::cos(t), dim == 1 ? 0.0 : r * std::sin(t)}, xi));
  };
  double best = -1.0, br = 0.0, bt = 0.0, bx = 0.0;
  for (int ir = 0; ir < radii; ++ir) {
    const double r = q * ir / (radii - 1);
    for (int id = 0; id < dirs; ++id) {
      const double t = 2.0 * kPi * id / dirs;
      for (int ix = 0; ix < xis; ++ix) {
        const double xi = -xi_max + 2.0 * xi_max * ix / (xis - 1);
        const double v = eval(r, t, xi);
        if (v > best) {
          best = v;
          br = r;
          bt = t;
          bx = xi;
        }
      }
    }
  }
  // Compass search around the best sample, clamped to the domain.
  double sr = q / (radii - 1), st = 2.0 * kPi / dirs, sx = 2.0 * xi_max / (xis - 1);
  for (int it = 0; it < 60; ++it) {
    bool moved = false;
    for (int axis = 0; axis < 3; ++axis) {
      if (axis == 1 && dim == 1) continue;
      for (double sgn : {-1.0, 1.0}) {
        double r = br, t = bt, xi = bx;
        if (axis == 0) r = std::clamp(br + sgn * sr, 0.0, q);
        if (axis == 1) t = bt + sgn * st;
        if (axis == 2) xi = std::clamp(bx + sgn * sx, -xi_max, xi_max);
        const double v = eval(r, t, xi);
        if (v > best) {
          best = v;
          br = r;
          bt = t;
          bx = xi;
          moved = true;
        }
      }
    }
    if (!moved) {
      sr *= 0.5;
      st *= 0.5;
      sx *= 0.5;
    }
  }
  return best + 1.0;
}

BarrierParameters choose_parameters(double delta, double bound_k, const AnisotropyPtr& w,
                                    int samples, std::uint64_t seed) {
  if (!(delta > 0.0) || !(bound_k > 0.0)) throw DomainError("delta and K must be positive");
  const int dim = w->dim();
  constexpr int kDirs = 3600;
  BarrierParameters out;
  out.mu = sphere_sup([&](Vec2 p) { return w->value(p) + *cap_function(p, dim); }, dim, 0.5, kDirs);
  out.a = delta / (8.0 * out.mu);
  out.q = 8.0 * bound_k / delta;
  const double budget = out.q * out.mu;
  for (int m = 1; m <= 4096; m *= 2) {
    const MollifiedAnisotropy wm(w, m, out.q);
    const double w0 = wm.value({0.0, 0.0});
    const double gap = sphere_sup(
        [&](Vec2 p) { return std::abs(wm.value(p) - w0 - w->value(p)); }, dim, 0.5 * out.q, 64);
    if (gap <= budget) {
      out.m0 = m;
      break;
    }
  }
  if (out.m0 == 0) throw PreconditionError("no mollification index up to 4096 meets the m0 bound");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(1.0, 3.0), ut(0.0, 2.0 * kPi);
  for (int m : {out.m0, 2 * out.m0}) {
    const BarrierFamily b(MollifiedAnisotropy(w, m, out.q), out.a, out.q);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
      // A quarter of the samples sit exactly on |x| = delta.
      const double r = delta * (s % 4 == 0 ? 1.0 : ur(rng));
      const double t = dim == 1 ? (s % 2 == 0 ? 0.0 : kPi) : ut(rng);
      const Vec2 x{r * std::cos(t), dim == 1 ? 0.0 : r * std::sin(t)};
      const double v = b.conjugate(x).value;
      worst = std::min(worst, v);
      if (v < 2.0 * bound_k) {
        throw PreconditionError("W* < 2K at x = (" + std::to_string(x.x) + ", " +
                                std::to_string(x.y) + "), value " + std::to_string(v));
      }
    }
    out.lower_bounds.emplace_back(m, worst);
  }
  return out;
}

double barrier_upper(const BarrierFamily& b, double beta, Vec2 x, double t, Vec2 xi0,
                     double offset) {
  double best = std::numeric_limits<double>::infinity();
  const int jr = b.dim() == 1 ? 0 : 1;
  for (int kj = -jr; kj <= jr; ++kj) {
    for (int ki = -1; ki <= 1; ++ki) {
      const Vec2 y{x.x + ki - xi0.x, b.dim() == 1 ? 0.0 : x.y + kj - xi0.y};
      best = std::min(best, b.conjugate(y).value);
    }
  }
  return beta * t + best + offset;
}

double barrier_lower(const BarrierFamily& b, double beta, Vec2 x, double t, Vec2 xi0,
                     double offset) {
  double best = -std::numeric_limits<double>::infinity();
  const int jr = b.dim() == 1 ? 0 : 1;
  for (int kj = -jr; kj <= jr; ++kj) {
    for (int ki = -1; ki <= 1; ++ki) {
      const Vec2 y{x.x + ki - xi0.x, b.dim() == 1 ? 0.0 : x.y + kj - xi0.y};
      best = std::max(best, -b.conjugate(-1.0 * y).value);
    }
  }
  return -beta * t + best + offset;
}

}  // namespace facetflow
