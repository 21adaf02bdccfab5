#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "facetflow/kernels.hpp"
#include "facetflow/torus_grid.hpp"

using namespace facetflow;

namespace {

GridFunction random_function(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridFunction u(g);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = d(rng);
  return u;
}

GridVectorField random_field(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridVectorField z(g);
  for (std::size_t k = 0; k < z.size(); ++k) z.set(k, {d(rng), d(rng)});
  return z;
}

GridFunction tent(const Grid& g, double slope) {
  return sample(g, [&](Vec2 x) { return slope * (0.5 - std::abs(x.x - 0.5)); });
}

}  // namespace

TEST_CASE("grid construction and wrapping") {
  CHECK_THROWS_AS(Grid(1, 4), DomainError);
  CHECK_THROWS_AS(Grid(3, 16), DomainError);
  Grid g(2, 16);
  CHECK(g.spacing() == 1.0 / 16);
  CHECK(g.index(-1, 0) == g.index(15, 0));
  CHECK(g.index(3, 17) == g.index(3, 1));
  CHECK(g.size() == 256);
}

TEST_CASE("torus distance") {
  CHECK(torus_distance({0.9, 0}, {0.1, 0}, 1) == doctest::Approx(0.2));
  CHECK(torus_distance({0.3, 0.7}, {0.3, 0.7}, 2) == 0.0);
  CHECK(torus_distance({0.75, 0}, {0, 0}, 2) == doctest::Approx(0.25));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Vec2 a{d(rng), d(rng)}, b{d(rng), d(rng)}, c{d(rng), d(rng)};
    CHECK(torus_distance(a, b, 2) == doctest::Approx(torus_distance(b, a, 2)));
    CHECK(torus_distance(a, c, 2) <= torus_distance(a, b, 2) + torus_distance(b, c, 2) + 1e-15);
    CHECK(torus_distance(a, b, 2) <= std::sqrt(2.0) / 2 + 1e-15);
  }
}

TEST_CASE("gradient and divergence are adjoint") {
  std::mt19937_64 rng(11);
  for (int dim : {1, 2}) {
    Grid g(dim, 24);
    CHECK(lipschitz_constant(GridFunction(g, 3.0)) == 0.0);
    for (int t = 0; t < 100; ++t) {
      const GridFunction u = random_function(g, rng);
      const GridVectorField z = random_field(g, rng);
      const double lhs = inner(gradient_fd(u), z);
      const double rhs = -inner(u, divergence_fd(z));
      CHECK(std::abs(lhs - rhs) <= 1e-11 * (1.0 + std::abs(lhs)));
      CHECK(std::abs(divergence_fd(z).mean()) <= 1e-12);
    }
  }
  Grid g(2, 16);
  CHECK_THROWS_AS(inner(GridFunction(g), GridFunction(Grid(2, 32))), GridMismatch);
}

TEST_CASE("lipschitz constant") {
  Grid g(1, 256);
  CHECK(lipschitz_constant(tent(g, 0.5)) == doctest::Approx(0.5).epsilon(1e-12));
  const auto s = sample(g, [](Vec2 x) { return std::sin(2 * std::numbers::pi * x.x); });
  CHECK(std::abs(lipschitz_constant(s) - 2 * std::numbers::pi) <= 2 * std::numbers::pi * 4 * g.spacing());
}

TEST_CASE("erosion and dilation") {
  Grid g(2, 32);
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(erode(GridFunction(g), -0.1), DomainError);
  const GridFunction c(g, 2.5);
  CHECK(erode(c, 0.2) == c);
  const GridFunction u = random_function(g, rng);
  CHECK(erode(u, 0.0) == u);
  CHECK(dilate(u, 0.0) == u);
  for (double eta : {0.05, 0.1, 0.3}) {
    const GridFunction e = erode(u, eta), d = dilate(u, eta);
    const GridFunction de = dilate(e, eta), ed = erode(d, eta);
    for (std::size_t k = 0; k < u.size(); ++k) {
      CHECK(e[k] <= u[k]);
      CHECK(u[k] <= d[k]);
      CHECK(ed[k] >= u[k]);
      CHECK(de[k] <= u[k]);
    }
    // Brute force over all nodes by torus distance.
    for (std::size_t k = 0; k < u.size(); k += 37) {
      double best = 1e300;
      for (std::size_t l = 0; l < u.size(); ++l)
        if (torus_distance(g.position(k), g.position(l), 2) <= eta + 1e-12) best = std::min(best, u[l]);
      CHECK(e[k] == best);
    }
  }
  Grid g1(1, 128);
  const GridFunction t = tent(g1, 0.5);
  CHECK(erode(t, 0.125).max() == doctest::Approx(t.max() - 0.5 * 0.125).epsilon(1e-12));
}

TEST_CASE("translation invariance") {
  Grid g(2, 16);
  std::mt19937_64 rng(5);
  const GridFunction u = random_function(g, rng);
  const GridFunction s = shift(u, 3, -5);
  CHECK(shift(erode(u, 0.15), 3, -5) == erode(s, 0.15));
  CHECK(shift(mollify(u, 0.2), 3, -5) == mollify(s, 0.2));
  CHECK(lipschitz_constant(s) == lipschitz_constant(u));
}

TEST_CASE("mollify moves a 1-Lipschitz function by at most the radius") {
  Grid g(2, 64);
  const auto d = sample(g, [](Vec2 x) { return torus_distance(x, {0.5, 0.5}, 2); });
  const auto m = mollify(d, 0.06);
  for (std::size_t k = 0; k < d.size(); ++k) CHECK(std::abs(m[k] - d[k]) <= 0.06);
}

TEST_CASE("serial and OpenMP kernels agree bitwise") {
  std::mt19937_64 rng(19);
  for (int dim : {1, 2}) {
    for (int n : {8, 33, 64}) {
      Grid g(dim, n);
      const kernels::Shape s{dim, n};
      const GridFunction u = random_function(g, rng);
      const GridVectorField z = random_field(g, rng);
      std::vector<double> ax(g.size()), ay(g.size()), bx(g.size()), by(g.size());
      kernels::omp::gradient(s, u.values(), n, ax, ay);
      kernels::serial::gradient(s, u.values(), n, bx, by);
      CHECK(ax == bx);
      CHECK(ay == by);
      kernels::omp::divergence(s, z.xs(), z.ys(), n, ax);
      kernels::serial::divergence(s, z.xs(), z.ys(), n, bx);
      CHECK(ax == bx);
      const auto off = ball_offsets(g, 0.2);
      kernels::omp::ball_extremum(s, u.values(), off, true, ax);
      kernels::serial::ball_extremum(s, u.values(), off, true, bx);
      CHECK(ax == bx);
      std::vector<std::uint8_t> mask(g.size());
      for (auto& m : mask) m = (rng() % 7) == 0;
      kernels::omp::squared_edt(s, mask, ax);
      kernels::serial::squared_edt(s, mask, bx);
      CHECK(ax == bx);
      CHECK(kernels::omp::sum(u.values()) == kernels::serial::sum(u.values()));
      CHECK(kernels::omp::dot(u.values(), z.xs()) == kernels::serial::dot(u.values(), z.xs()));
    }
  }
}

TEST_CASE("squared distance transform matches brute force") {
  std::mt19937_64 rng(23);
  Grid g(2, 32);
  std::vector<std::uint8_t> mask(g.size());
  for (auto& m : mask) m = (rng() % 29) == 0;
  std::vector<double> out(g.size());
  kernels::omp::squared_edt({2, 32}, mask, out);
  for (std::size_t k = 0; k < g.size(); ++k) {
    double best = 1e300;
    for (std::size_t l = 0; l < g.size(); ++l) {
      if (!mask[l]) continue;
      const double d = torus_distance(g.position(k), g.position(l), 2) * 32;
      best = std::min(best, d * d);
    }
    CHECK(out[k] == doctest::Approx(best).epsilon(1e-12));
  }
  std::vector<std::uint8_t> empty(g.size(), 0);
  kernels::omp::squared_edt({2, 32}, empty, out);
  CHECK(std::isinf(out[0]));
}
