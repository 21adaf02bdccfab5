#include "facetflow/speed_law.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace facetflow {

SpeedLaw SpeedLaw::tv_flow() {
  return {"tv_flow", [](Vec2, double xi) { return -xi; }};
}

SpeedLaw SpeedLaw::graph_flow() {
  return {"graph_flow", [](Vec2 p, double xi) { return -std::sqrt(1.0 + dot(p, p)) * xi; }};
}

SpeedLaw SpeedLaw::driven(double c) {
  return {"driven", [c](Vec2, double xi) { return -xi - c; }, c};
}

SpeedLaw SpeedLaw::zero() {
  return {"zero", [](Vec2, double) { return 0.0; }};
}

SpeedLaw SpeedLaw::by_name(const std::string& name, double driving) {
  if (name == "tv_flow") return tv_flow();
  if (name == "graph_flow") return graph_flow();
  if (name == "driven") return driven(driving);
  if (name == "zero") return zero();
  throw DomainError("unknown speed law '" + name + "'");
}

double SpeedLaw::xi_slope_bound(int dim, double p_max, double xi_max) const {
  constexpr int kRadii = 33, kDirs = 16, kXi = 33;
  const int dirs = dim == 1 ? 2 : kDirs;
  const double dxi = 2.0 * xi_max / (kXi - 1);
  const double e = std::max(1e-6, 1e-6 * xi_max);
  double best = 0.0;
  for (int r = 0; r < kRadii; ++r) {
    const double rad = p_max * r / (kRadii - 1);
    for (int d = 0; d < dirs; ++d) {
      const double t = 2.0 * std::numbers::pi * d / dirs;
      const Vec2 p{rad * std::cos(t), dim == 1 ? 0.0 : rad * std::sin(t)};
      for (int k = 0; k < kXi; ++k) {
        const double xi = -xi_max + k * dxi;
        best = std::max(best, std::abs(f_(p, xi + e) - f_(p, xi - e)) / (2.0 * e));
      }
    }
  }
  return best;
}

bool check_ellipticity(const SpeedLaw& f, int dim, double p_max, double xi_max, int count,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> up(-p_max, p_max), ux(-xi_max, xi_max);
  for (int k = 0; k < count; ++k) {
    Vec2 p{up(rng), dim == 1 ? 0.0 : up(rng)};
    double a = ux(rng), b = ux(rng);
    if (a < b) std::swap(a, b);
    if (f(p, a) > f(p, b) + 1e-12 * (1.0 + std::abs(f(p, b)))) return false;
  }
  return true;
}

}  // namespace facetflow
