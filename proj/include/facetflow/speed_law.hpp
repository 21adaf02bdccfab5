#pragma once

#include <functional>
#include <random>
#include <string>

#include "facetflow/torus_grid.hpp"

namespace facetflow {

/// Speed F(p, xi) of u_t + F(grad u, L u) = 0. Must be non-increasing in xi.
class SpeedLaw {
 public:
  using Fn = std::function<double(Vec2, double)>;

  SpeedLaw(std::string name, Fn f, double driving = 0.0)
      : name_(std::move(name)), f_(std::move(f)), driving_(driving) {}

  /// F = -xi.
  static SpeedLaw tv_flow();
  /// F = -sqrt(1 + |p|^2) xi.
  static SpeedLaw graph_flow();
  /// F = -xi - c.
  static SpeedLaw driven(double c);
  /// F = 0.
  static SpeedLaw zero();
  /// Lookup by tag; throws DomainError for unknown names.
  static SpeedLaw by_name(const std::string& name, double driving = 0.0);

  const std::string& name() const { return name_; }
  double driving() const { return driving_; }
  double operator()(Vec2 p, double xi) const { return f_(p, xi); }

  /// Sampled sup of |dF/dxi| over |p| <= p_max, |xi| <= xi_max (difference
  /// quotients on a dense grid).
  double xi_slope_bound(int dim, double p_max, double xi_max) const;

 private:
  std::string name_;
  Fn f_;
  double driving_;
};

/// Sampled degenerate-ellipticity check: F(p, xi) <= F(p, eta) whenever
/// xi >= eta, over `count` random triples with |p| <= p_max, |xi| <= xi_max.
bool check_ellipticity(const SpeedLaw& f, int dim, double p_max, double xi_max, int count,
                       std::mt19937_64& rng);

}  // namespace facetflow
