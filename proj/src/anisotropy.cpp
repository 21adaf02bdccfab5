#include "facetflow/anisotropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace facetflow {

namespace {

constexpr double kPi = std::numbers::pi;

// Array loops with the model's own (non-virtual) kernels.
template <class Model>
class Batched : public Anisotropy {
 public:
  using Anisotropy::Anisotropy;

  void project_wulff_all(std::span<double> zx, std::span<double> zy) const override {
    const Model& self = static_cast<const Model&>(*this);
    const std::ptrdiff_t n = std::ptrdiff_t(zx.size());
    if (dim() == 1) {
      const double r = self.Model::value_impl({1.0, 0.0});
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < n; ++k) {
        zx[k] = std::clamp(zx[k], -r, r);
        zy[k] = 0.0;
      }
      return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const Vec2 q = self.Model::project_impl({zx[k], zy[k]});
      zx[k] = q.x;
      zy[k] = q.y;
    }
  }

  void value_all(std::span<const double> px, std::span<const double> py,
                 std::span<double> out) const override {
    const Model& self = static_cast<const Model&>(*this);
    const std::ptrdiff_t n = std::ptrdiff_t(px.size());
    const bool one = dim() == 1;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      out[k] = self.Model::value_impl({px[k], one ? 0.0 : py[k]});
    }
  }
};

class Euclidean final : public Batched<Euclidean> {
  friend class Batched<Euclidean>;

 public:
  using Batched::Batched;
  std::string name() const override { return "euclidean"; }
  double lower_bound() const override { return 1.0; }

 protected:
  double value_impl(Vec2 p) const override { return norm(p); }
  Vec2 gradient_impl(Vec2 p) const override { return (1.0 / norm(p)) * p; }
  Sym2 hessian_impl(Vec2 p) const override {
    const double r = norm(p);
    const Vec2 n = (1.0 / r) * p;
    Sym2 h = Sym2::identity();
    h.xx -= n.x * n.x;
    h.xy -= n.x * n.y;
    h.yy -= n.y * n.y;
    return (1.0 / r) * h;
  }
  double gauge_impl(Vec2 x) const override { return norm(x); }
  Vec2 project_impl(Vec2 z) const override {
    const double r = norm(z);
    return r > 1.0 ? (1.0 / r) * z : z;
  }
};

class Elliptic final : public Batched<Elliptic> {
  friend class Batched<Elliptic>;

 public:
  Elliptic(int dim, const Sym2& m) : Batched(dim), m_(m), minv_(inverse(m)) {
    const auto ev = eigenvalues(m);
    if (!(ev[0] > 0.0)) throw DomainError("elliptic anisotropy needs a positive definite matrix");
    lambda0_ = std::sqrt(dim == 1 ? m.xx : ev[0]);
    // Eigenbasis of M for the projection.
    mu_ = ev;
    if (std::abs(m.xy) > 0.0) {
      q1_ = Vec2{m.xy, ev[0] - m.xx};
      q1_ = (1.0 / norm(q1_)) * q1_;
    } else {
      q1_ = m.xx <= m.yy ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    }
    q2_ = Vec2{-q1_.y, q1_.x};
  }
  std::string name() const override { return "elliptic"; }
  double lower_bound() const override { return lambda0_; }

 protected:
  double value_impl(Vec2 p) const override { return std::sqrt(std::max(0.0, dot(p, m_.apply(p)))); }
  Vec2 gradient_impl(Vec2 p) const override { return (1.0 / value_impl(p)) * m_.apply(p); }
  Sym2 hessian_impl(Vec2 p) const override {
    const double w = value_impl(p);
    const Vec2 mp = m_.apply(p);
    Sym2 h = m_;
    h.xx -= mp.x * mp.x / (w * w);
    h.xy -= mp.x * mp.y / (w * w);
    h.yy -= mp.y * mp.y / (w * w);
    return (1.0 / w) * h;
  }
  double gauge_impl(Vec2 x) const override { return std::sqrt(std::max(0.0, dot(x, minv_.apply(x)))); }
  Vec2 project_impl(Vec2 z) const override {
    if (gauge_impl(z) <= 1.0) return z;
    // Minimise |y - z|^2 subject to y^T M^-1 y = 1. In the eigenbasis of M,
    // y_i = mu_i z_i / (mu_i + lambda) and g(lambda) = sum mu_i z_i^2 /
    // (mu_i + lambda)^2 - 1 is convex decreasing: Newton from 0 is monotone.
    const double c1 = dot(z, q1_);
    const double c2 = dot(z, q2_);
    double lam = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double d1 = mu_[0] + lam;
      const double d2 = mu_[1] + lam;
      const double g = mu_[0] * c1 * c1 / (d1 * d1) + mu_[1] * c2 * c2 / (d2 * d2) - 1.0;
      const double dg = -2.0 * (mu_[0] * c1 * c1 / (d1 * d1 * d1) + mu_[1] * c2 * c2 / (d2 * d2 * d2));
      const double step = g / dg;
      lam -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + lam)) break;
    }
    Vec2 y = (mu_[0] * c1 / (mu_[0] + lam)) * q1_ + (mu_[1] * c2 / (mu_[1] + lam)) * q2_;
    const double gy = gauge_impl(y);
    if (gy > 1.0) y *= 1.0 / gy;
    return y;
  }

 private:
  Sym2 m_;
  Sym2 minv_;
  double lambda0_ = 1.0;
  std::array<double, 2> mu_{};
  Vec2 q1_, q2_;
};

class L4 final : public Batched<L4> {
  friend class Batched<L4>;

 public:
  using Batched::Batched;
  std::string name() const override { return "l4"; }
  double lower_bound() const override { return dim() == 1 ? 1.0 : std::pow(2.0, -0.25); }

 protected:
  double value_impl(Vec2 p) const override {
    return std::pow(p.x * p.x * p.x * p.x + p.y * p.y * p.y * p.y, 0.25);
  }
  Vec2 gradient_impl(Vec2 p) const override {
    const double w = value_impl(p);
    const double w3 = w * w * w;
    return {p.x * p.x * p.x / w3, p.y * p.y * p.y / w3};
  }
  Sym2 hessian_impl(Vec2 p) const override {
    const double w = value_impl(p);
    const double w3 = w * w * w;
    const double w7 = w3 * w3 * w;
    const double ax = p.x * p.x * p.x;
    const double ay = p.y * p.y * p.y;
    return {3.0 * p.x * p.x / w3 - 3.0 * ax * ax / w7, -3.0 * ax * ay / w7,
            3.0 * p.y * p.y / w3 - 3.0 * ay * ay / w7};
  }
  double gauge_impl(Vec2 x) const override {
    return std::pow(std::pow(std::abs(x.x), 4.0 / 3.0) + std::pow(std::abs(x.y), 4.0 / 3.0), 0.75);
  }
  Vec2 project_impl(Vec2 z) const override {
    if (gauge_impl(z) <= 1.0) return z;
    // KKT: y_i = sign(z_i) r_i^3 with r_i^3 + c r_i = |z_i|, c = 4 lambda / 3,
    // and sum r_i^4 = 1. Newton on c; each r_i by monotone Newton from above.
    const double a[2] = {std::abs(z.x), std::abs(z.y)};
    auto solve_r = [](double ai, double c) {
      if (ai == 0.0) return 0.0;
      double r = std::cbrt(ai);
      if (c > 0.0) r = std::min(r, ai / c);
      for (int it = 0; it < 100; ++it) {
        const double f = r * r * r + c * r - ai;
        const double step = f / (3.0 * r * r + c);
        r -= step;
        if (std::abs(step) <= 1e-16 * r) break;
      }
      return r;
    };
    double c = 0.0;
    double r[2] = {0.0, 0.0};
    for (int it = 0; it < 200; ++it) {
      double h = -1.0, dh = 0.0;
      for (int i = 0; i < 2; ++i) {
        r[i] = solve_r(a[i], c);
        h += r[i] * r[i] * r[i] * r[i];
        if (r[i] > 0.0) dh -= 4.0 * r[i] * r[i] * r[i] * r[i] / (3.0 * r[i] * r[i] + c);
      }
      const double step = h / dh;
      c -= step;
      if (c < 0.0) c = 0.0;
      if (std::abs(step) <= 1e-15 * (1.0 + c)) break;
    }
    for (int i = 0; i < 2; ++i) r[i] = solve_r(a[i], c);
    Vec2 y{std::copysign(r[0] * r[0] * r[0], z.x), std::copysign(r[1] * r[1] * r[1], z.y)};
    const double gy = gauge_impl(y);
    if (gy > 1.0) y *= 1.0 / gy;
    return y;
  }
};

// Normalisation of exp(-1/(1-|x|^2)) on the unit ball of R^n.
double mollifier_constant(int dim) {
  const int steps = 200000;
  double acc = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double r = (k + 0.5) / steps;
    const double f = std::exp(-1.0 / (1.0 - r * r));
    acc += dim == 1 ? 2.0 * f : 2.0 * kPi * r * f;
  }
  return 1.0 / (acc / steps);
}

// Value with gradient and Hessian in p (second-order forward mode).
struct Dual {
  double v = 0.0, gx = 0.0, gy = 0.0, hxx = 0.0, hxy = 0.0, hyy = 0.0;

  Dual& operator+=(const Dual& o) {
    v += o.v; gx += o.gx; gy += o.gy; hxx += o.hxx; hxy += o.hxy; hyy += o.hyy;
    return *this;
  }
  void add_scaled(double c, const Dual& o) {
    v += c * o.v; gx += c * o.gx; gy += c * o.gy;
    hxx += c * o.hxx; hxy += c * o.hxy; hyy += c * o.hyy;
  }
  friend Dual operator-(Dual a, const Dual& b) {
    a.add_scaled(-1.0, b);
    return a;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v,
            a.v * b.gx + b.v * a.gx,
            a.v * b.gy + b.v * a.gy,
            a.v * b.hxx + b.v * a.hxx + 2.0 * a.gx * b.gx,
            a.v * b.hxy + b.v * a.hxy + a.gx * b.gy + a.gy * b.gx,
            a.v * b.hyy + b.v * a.hyy + 2.0 * a.gy * b.gy};
  }
};

Dual reciprocal(const Dual& b) {
  const double r = 1.0 / b.v;
  const double r2 = r * r;
  const double r3 = r2 * r;
  return {r,
          -b.gx * r2,
          -b.gy * r2,
          -b.hxx * r2 + 2.0 * b.gx * b.gx * r3,
          -b.hxy * r2 + 2.0 * b.gx * b.gy * r3,
          -b.hyy * r2 + 2.0 * b.gy * b.gy * r3};
}

Dual operator/(const Dual& a, const Dual& b) { return a * reciprocal(b); }

// a * (y_axis - p_axis) where d/dp of the offset is -e_axis.
Dual times_offset(const Dual& a, double d, int axis) {
  Dual out{a.v * d, a.gx * d, a.gy * d, a.hxx * d, a.hxy * d, a.hyy * d};
  if (axis == 0) {
    out.gx -= a.v;
    out.hxx -= 2.0 * a.gx;
    out.hxy -= a.gy;
  } else {
    out.gy -= a.v;
    out.hyy -= 2.0 * a.gy;
    out.hxy -= a.gx;
  }
  return out;
}

}  // namespace

Anisotropy::Anisotropy(int dim) : dim_(dim) {
  if (dim != 1 && dim != 2) throw DomainError("anisotropy dimension must be 1 or 2");
}

Vec2 Anisotropy::gradient(Vec2 p) const {
  p = restrict(p);
  if (p.x == 0.0 && p.y == 0.0) throw DomainError("gradient of W requested at p = 0");
  if (dim_ == 1) return {std::copysign(value_impl({1.0, 0.0}), p.x), 0.0};
  return gradient_impl(p);
}

Sym2 Anisotropy::hessian(Vec2 p) const {
  p = restrict(p);
  if (p.x == 0.0 && p.y == 0.0) throw DomainError("Hessian of W requested at p = 0");
  if (dim_ == 1) return {};
  return hessian_impl(p);
}

double Anisotropy::gauge(Vec2 x) const {
  if (dim_ == 1) return std::abs(x.x) / value_impl({1.0, 0.0});
  return gauge_impl(x);
}

void Anisotropy::project_wulff_all(std::span<double> zx, std::span<double> zy) const {
  for (std::size_t k = 0; k < zx.size(); ++k) {
    const Vec2 q = project_wulff({zx[k], zy[k]});
    zx[k] = q.x;
    zy[k] = q.y;
  }
}

void Anisotropy::value_all(std::span<const double> px, std::span<const double> py,
                           std::span<double> out) const {
  for (std::size_t k = 0; k < px.size(); ++k) out[k] = value({px[k], py[k]});
}

Vec2 Anisotropy::project_wulff(Vec2 z) const {
  if (dim_ == 1) {
    const double r = value_impl({1.0, 0.0});
    return {std::clamp(z.x, -r, r), 0.0};
  }
  return project_impl(z);
}

AnisotropyPtr make_euclidean(int dim) { return std::make_shared<Euclidean>(dim); }
AnisotropyPtr make_elliptic(int dim, const Sym2& m) { return std::make_shared<Elliptic>(dim, m); }
AnisotropyPtr make_l4(int dim) { return std::make_shared<L4>(dim); }

double dual_norm(const Anisotropy& w, Vec2 x) {
  if (w.dim() == 1) {
    const double up = x.x / w.value({1.0, 0.0});
    const double down = -x.x / w.value({-1.0, 0.0});
    return std::max({up, down, 0.0});
  }
  if (x.x == 0.0 && x.y == 0.0) return 0.0;
  auto ratio = [&](double t) {
    const Vec2 d{std::cos(t), std::sin(t)};
    return dot(x, d) / w.value(d);
  };
  constexpr int kDirections = 720;
  const double dt = 2.0 * kPi / kDirections;
  int best = 0;
  double best_val = -1e300;
  for (int k = 0; k < kDirections; ++k) {
    const double v = ratio(k * dt);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  // Golden-section refinement on the bracket around the best direction.
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = (best - 1) * dt, hi = (best + 1) * dt;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = ratio(c), fd = ratio(d);
  int it = 0;
  for (; it < 200 && hi - lo > 1e-12; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = ratio(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = ratio(d);
    }
  }
  const double result = std::max({fc, fd, best_val});
  const double spread = std::abs(ratio(lo) - ratio(hi));
  if (spread > 1e-8 * std::abs(result)) {
    throw ToleranceError("dual norm refinement did not settle", spread);
  }
  return result;
}

bool wulff_membership(const Anisotropy& w, Vec2 z, double tol) { return w.gauge(z) <= 1.0 + tol; }

bool subdifferential_contains(const Anisotropy& w, Vec2 p, Vec2 z, double tol) {
  if (w.dim() == 1) {
    p.y = 0.0;
    z.y = 0.0;
  }
  if (p.x == 0.0 && p.y == 0.0) return wulff_membership(w, z, tol);
  return norm(z - w.gradient(p)) <= tol;
}

double k_operator(const Anisotropy& w, Vec2 p, const Sym2& x) {
  return trace_product(w.hessian(p), x);
}

// ---------------------------------------------------------------------------

MollifiedAnisotropy::MollifiedAnisotropy(AnisotropyPtr base, int m, double sample_radius)
    : base_(std::move(base)), m_(m), sample_radius_(sample_radius) {
  if (!base_) throw DomainError("mollified anisotropy needs a base model");
  if (m < 1) throw DomainError("mollification index must be >= 1");
  if (!(sample_radius > 0.0)) throw DomainError("sample radius must be positive");
  eps_ = 1.0 / m;
  step_ = 2.0 * eps_ / 33.0;
  static const double c1 = mollifier_constant(1);
  static const double c2 = mollifier_constant(2);
  norm_ = base_->dim() == 1 ? c1 : c2;
  estimate_ellipticity();
}

Jet MollifiedAnisotropy::evaluate(Vec2 p) const {
  const int dim = base_->dim();
  if (dim == 1) p.y = 0.0;
  const double inv_eps = 1.0 / eps_;
  const double cell = dim == 1 ? step_ : step_ * step_;
  const double scale = norm_ * cell * (dim == 1 ? inv_eps : inv_eps * inv_eps);
  auto lattice_range = [&](double c) {
    const int lo = int(std::ceil((c - eps_) / step_ - 0.5));
    const int hi = int(std::floor((c + eps_) / step_ - 0.5));
    return std::array<int, 2>{lo, hi};
  };
  const auto rx = lattice_range(p.x);
  const auto ry = dim == 1 ? std::array<int, 2>{0, 0} : lattice_range(p.y);
  // Lattice moments of the kernel around p and W-weighted sums, with their
  // p-derivatives carried along.
  Dual m0, m1x, m1y, m2xx, m2xy, m2yy, s0, s1x, s1y;
  for (int j = ry[0]; j <= ry[1]; ++j) {
    const double yy = dim == 1 ? 0.0 : (j + 0.5) * step_;
    const double xi_y = (p.y - yy) * inv_eps;
    for (int i = rx[0]; i <= rx[1]; ++i) {
      const double yx = (i + 0.5) * step_;
      const double xi_x = (p.x - yx) * inv_eps;
      const double r2 = xi_x * xi_x + xi_y * xi_y;
      if (r2 >= 1.0) continue;
      const double s = 1.0 / (1.0 - r2);
      const double s2 = s * s;
      const double s3 = s2 * s;
      const double phi = scale * std::exp(-s);
      // phi(xi) = exp(g), g = -s: grad g = -2 xi s^2, hess g = -2 s^2 I - 8 s^3 xi xi^T
      const double dgx = -2.0 * xi_x * s2;
      const double dgy = -2.0 * xi_y * s2;
      const double ge = phi * inv_eps;
      const double he = phi * inv_eps * inv_eps;
      Dual k;
      k.v = phi;
      k.gx = ge * dgx;
      k.hxx = he * (dgx * dgx - 2.0 * s2 - 8.0 * s3 * xi_x * xi_x);
      if (dim == 2) {
        k.gy = ge * dgy;
        k.hxy = he * (dgx * dgy - 8.0 * s3 * xi_x * xi_y);
        k.hyy = he * (dgy * dgy - 2.0 * s2 - 8.0 * s3 * xi_y * xi_y);
      }
      const double w = base_->value({yx, yy});
      const Dual kx = times_offset(k, yx - p.x, 0);
      m0 += k;
      m1x += kx;
      m2xx += times_offset(kx, yx - p.x, 0);
      s0.add_scaled(w, k);
      s1x.add_scaled(w, kx);
      if (dim == 2) {
        const Dual ky = times_offset(k, yy - p.y, 1);
        m1y += ky;
        m2xy += times_offset(kx, yy - p.y, 1);
        m2yy += times_offset(ky, yy - p.y, 1);
        s1y.add_scaled(w, ky);
      }
    }
  }
  // Weights k_i (alpha + beta . d_i) reproduce affine functions exactly:
  // sum = 1 and first moment = 0.
  Dual value;
  if (dim == 1) {
    const Dual q = m1x / m2xx;
    const Dual alpha = reciprocal(m0 - m1x * q);
    value = alpha * (s0 - q * s1x);
  } else {
    const Dual det = m2xx * m2yy - m2xy * m2xy;
    const Dual inv_det = reciprocal(det);
    const Dual qx = (m2yy * m1x - m2xy * m1y) * inv_det;
    const Dual qy = (m2xx * m1y - m2xy * m1x) * inv_det;
    const Dual alpha = reciprocal(m0 - m1x * qx - m1y * qy);
    value = alpha * (s0 - qx * s1x - qy * s1y);
  }
  const double inv_m = 1.0 / m_;
  Jet out;
  out.value = value.v + inv_m * (p.x * p.x + p.y * p.y);
  out.gradient = {value.gx + 2.0 * inv_m * p.x, dim == 1 ? 0.0 : value.gy + 2.0 * inv_m * p.y};
  out.hessian = {value.hxx + 2.0 * inv_m, dim == 1 ? 0.0 : value.hxy,
                 dim == 1 ? 0.0 : value.hyy + 2.0 * inv_m};
  return out;
}

Jet MollifiedAnisotropy::jet(Vec2 p, bool) const { return evaluate(p); }

Vec2 MollifiedAnisotropy::gradient(Vec2 p) const { return evaluate(p).gradient; }

void MollifiedAnisotropy::estimate_ellipticity() {
  std::vector<double> radii = {0.0};
  for (double f : {0.0625, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0, 1.25, 1.5, 2.0, 4.0})
    radii.push_back(f * eps_);
  for (double r = 8.0 * eps_; r < sample_radius_; r *= 2.0) radii.push_back(r);
  radii.push_back(sample_radius_);
  const int dirs = base_->dim() == 1 ? 2 : 24;
  double lmin = 1e300, lmax = 0.0;
  for (double r : radii) {
    for (int k = 0; k < dirs; ++k) {
      const double t = base_->dim() == 1 ? k * kPi : (k + 0.5) * 2.0 * kPi / dirs;
      const Vec2 p{r * std::cos(t), base_->dim() == 1 ? 0.0 : r * std::sin(t)};
      const Sym2 h = hessian(p);
      if (base_->dim() == 1) {
        lmin = std::min(lmin, h.xx);
        lmax = std::max(lmax, h.xx);
      } else {
        const auto ev = eigenvalues(h);
        lmin = std::min(lmin, ev[0]);
        lmax = std::max(lmax, ev[1]);
      }
      if (r == 0.0) break;
    }
  }
  lambda_min_ = lmin;
  lambda_max_ = lmax;
  a_m_ = std::max(lmax, lmin > 0.0 ? 1.0 / lmin : 1e300);
}

}  // namespace facetflow
