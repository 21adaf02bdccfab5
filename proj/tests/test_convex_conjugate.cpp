#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "facetflow/convex_conjugate.hpp"

using namespace facetflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("Legendre transform of the half square is itself") {
  for (int dim : {1, 2}) {
    const int n = dim == 1 ? 401 : 161;
    const auto f = SampledConvexFunction::sample(dim, -2.0, 2.0, n, [](Vec2 p) { return 0.5 * dot(p, p); });
    const auto g = legendre_transform(f, -1.5, 1.5, n);
    const double dp = f.spacing();
    for (std::size_t k = 0; k < g.size(); ++k) {
      REQUIRE(g.finite(k));
      const Vec2 x = g.node(k);
      // Sampling p on a lattice costs at most dp^2/8 per axis.
      CHECK(std::abs(g.value(k) - 0.5 * dot(x, x)) <= dim * dp * dp / 8 + 1e-12);
    }
  }
}

TEST_CASE("Legendre transform of the norm is the indicator of the ball") {
  const auto f1 = SampledConvexFunction::sample(1, -3.0, 3.0, 301, [](Vec2 p) { return std::abs(p.x); });
  const auto g1 = legendre_transform(f1, -2.0, 2.0, 201);
  for (std::size_t k = 0; k < g1.size(); ++k) {
    const double x = g1.node(k).x;
    if (std::abs(x) <= 1.0 - 1e-12) {
      REQUIRE(g1.finite(k));
      CHECK(std::abs(g1.value(k)) <= 1e-12);
    } else if (std::abs(x) > 1.0 + 1e-12) {
      CHECK_FALSE(g1.finite(k));
    }
  }
  const auto f2 = SampledConvexFunction::sample(2, -3.0, 3.0, 121, [](Vec2 p) { return norm(p); });
  const auto g2 = legendre_transform(f2, -2.0, 2.0, 81);
  for (std::size_t k = 0; k < g2.size(); ++k) {
    const double r = norm(g2.node(k));
    if (r <= 0.9) {
      REQUIRE(g2.finite(k));
      CHECK(std::abs(g2.value(k)) <= 1e-12);
    } else if (r >= 1.1) {
      CHECK_FALSE(g2.finite(k));
    }
  }
}

TEST_CASE("biconjugation and Fenchel-Young on sampled convex functions") {
  auto fn = [](Vec2 p) { return std::pow(std::abs(p.x), 1.5) + 0.3 * p.x * p.y + p.y * p.y; };
  const int n = 81;
  const auto f = SampledConvexFunction::sample(2, -1.0, 1.0, n, fn);
  const auto g = legendre_transform(f, -4.0, 4.0, 161);
  const auto ff = legendre_transform(g, -1.0, 1.0, n);
  const double dp = f.spacing();
  double worst = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!ff.finite(k)) continue;
    worst = std::max(worst, std::abs(ff.value(k) - f.value(k)));
  }
  // Within two cells of the p lattice: |f''| dp^2-scaled error.
  CHECK(worst <= 2.0 * dp * 2.5);
  for (std::size_t a = 0; a < g.size(); a += 7) {
    if (!g.finite(a)) continue;
    for (std::size_t k = 0; k < f.size(); k += 5)
      CHECK(f.value(k) + g.value(a) >= dot(f.node(k), g.node(a)) - 1e-12);
  }
  const auto bad = SampledConvexFunction::sample(1, -1.0, 1.0, 11, [](Vec2) { return kInf; });
  CHECK_THROWS_AS(legendre_transform(bad, -1.0, 1.0, 5), DomainError);
}

TEST_CASE("interpolation respects flagged nodes") {
  const auto f = SampledConvexFunction::sample(1, -1.0, 1.0, 5, [](Vec2 p) { return p.x > 0.6 ? kInf : p.x; });
  CHECK(*f.interpolate({-0.25, 0}) == doctest::Approx(-0.25));
  CHECK_FALSE(f.interpolate({0.75, 0}).has_value());
  CHECK_FALSE(f.interpolate({1.5, 0}).has_value());
}

TEST_CASE("cap function") {
  CHECK(*cap_function({0, 0}) == 0.0);
  CHECK(*cap_function({0.5, 0}) == doctest::Approx(-std::log(0.75)));
  CHECK_FALSE(cap_function({1.0, 0}).has_value());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-0.7, 0.7);
  for (int t = 0; t < 100; ++t) {
    const Vec2 p{d(rng), d(rng)}, q{d(rng), d(rng)};
    CHECK(*cap_function(0.5 * (p + q)) <= 0.5 * (*cap_function(p) + *cap_function(q)) + 1e-14);
  }
}

TEST_CASE("speed bound beta") {
  CHECK(beta_aq(SpeedLaw::tv_flow(), 2, 0.04, 32) == doctest::Approx(2 / 0.04 + 1));
  CHECK(beta_aq(SpeedLaw::zero(), 2, 0.04, 32) == doctest::Approx(1.0));
  CHECK(beta_aq(SpeedLaw::graph_flow(), 2, 0.5, 3) == doctest::Approx(std::sqrt(10.0) * 4 + 1).epsilon(1e-9));
  CHECK(beta_aq(SpeedLaw::graph_flow(), 1, 0.5, 3) == doctest::Approx(std::sqrt(10.0) * 2 + 1).epsilon(1e-9));
}

TEST_CASE("barrier conjugate") {
  for (int dim : {1, 2}) {
    CAPTURE(dim);
    const BarrierFamily b(MollifiedAnisotropy(make_euclidean(dim), 8, 4.0), 0.25, 4.0);
    CHECK_THROWS_AS(BarrierFamily(MollifiedAnisotropy(make_euclidean(dim), 8), 0.0, 4.0), DomainError);
    const Jet c0 = b.conjugate({0, 0});
    CHECK(std::abs(c0.value) <= 1e-14);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int t = 0; t < 30; ++t) {
      Vec2 x{d(rng), d(rng)};
      if (dim == 1) x.y = 0;
      const Jet c = b.conjugate(x);
      CHECK(c.value >= 0.0);
      CHECK(norm(c.gradient) < 4.0);
      const double l = b.operator_value(x);
      CHECK(l > 0.0);
      CHECK(l <= dim / 0.25 + 1e-9);
      // Hessian of W* against differences of its gradient.
      const double e = 1e-5;
      const Vec2 gp = b.conjugate_gradient({x.x + e, x.y}), gm = b.conjugate_gradient({x.x - e, x.y});
      CHECK((gp.x - gm.x) / (2 * e) == doctest::Approx(c.hessian.xx).epsilon(1e-3));
      // Fenchel-Young equality at the maximiser.
      CHECK(*b.primal(c.gradient) + c.value == doctest::Approx(dot(x, c.gradient)).epsilon(1e-12));
    }
  }
}

TEST_CASE("barrier tables agree with the pointwise conjugate") {
  BarrierFamily b(MollifiedAnisotropy(make_euclidean(1), 8, 4.0), 0.25, 4.0);
  b.build_tables(2001, 2.0, 81);
  const auto& t = *b.conjugate_table();
  for (std::size_t k = 0; k < t.size(); ++k) {
    REQUIRE(t.finite(k));
    CHECK(std::abs(t.value(k) - b.conjugate(t.node(k)).value) <= 1e-4);
  }
}

TEST_CASE("parameter choice gives the W* lower bound") {
  const auto w = make_euclidean(2);
  const BarrierParameters p = choose_parameters(0.25, 1.0, w, 200);
  CHECK(p.mu == doctest::Approx(0.5 - std::log(0.75)).epsilon(1e-10));
  CHECK(p.a == doctest::Approx(0.25 / (8 * p.mu)));
  CHECK(p.q == doctest::Approx(32.0));
  CHECK(p.m0 == 16);
  for (const auto& [m, lb] : p.lower_bounds) CHECK(lb >= 2.0);
  const BarrierParameters p2 = choose_parameters(0.25, 2.0, make_euclidean(1), 50);
  CHECK(p2.q == doctest::Approx(2 * 32.0));
}

TEST_CASE("periodised barriers") {
  const BarrierFamily b(MollifiedAnisotropy(make_euclidean(1), 8, 4.0), 0.25, 4.0);
  const Vec2 xi{0.3, 0};
  CHECK(barrier_upper(b, 5.0, xi, 0.0, xi, 0.7) == doctest::Approx(0.7));
  CHECK(barrier_upper(b, 5.0, {0.6, 0}, 0.2, xi, 0.0) - barrier_upper(b, 5.0, {0.6, 0}, 0.0, xi, 0.0) ==
        doctest::Approx(1.0));
  CHECK(barrier_lower(b, 5.0, xi, 0.0, xi, 0.7) == doctest::Approx(0.7));
  for (double x1 : {0.0, 0.2, 0.5, 0.9})
    for (double x2 : {0.05, 0.45, 0.8}) {
      const double du = std::abs(barrier_upper(b, 1, {x1, 0}, 0, xi, 0) - barrier_upper(b, 1, {x2, 0}, 0, xi, 0));
      CHECK(du <= 4.0 * torus_distance({x1, 0}, {x2, 0}, 1) + 1e-12);
    }
}
