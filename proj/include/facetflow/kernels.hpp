#pragma once

// Data-parallel grid kernels. Every kernel exists twice: an OpenMP version
// (namespace omp, used by the library) and a plain serial reference
// (namespace serial) kept for equivalence tests and benchmarks. Both produce
// bitwise identical output; sums use a fixed block decomposition so the
// result does not depend on the thread count.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace facetflow::kernels {

struct Shape {
  int dim;
  int n;
  std::size_t size() const { return dim == 1 ? std::size_t(n) : std::size_t(n) * n; }
};

// prox_step is the primal half of the primal-dual resolvent iteration:
//   v <- (v + tau (div z + psi / a)) / (1 + tau / a),  vbar <- v + theta (v - v_old).
// hermite_flux replaces every p by the cubic Hermite interpolant of the table
// (g, g') on lo + k step, extended linearly past both ends.

/// Block length of deterministic reductions.
inline constexpr std::size_t kSumBlock = 1024;

#define FACETFLOW_KERNEL_DECLS                                                         \
  void gradient(Shape s, std::span<const double> u, double inv_h, std::span<double> gx, \
                std::span<double> gy);                                                 \
  void divergence(Shape s, std::span<const double> zx, std::span<const double> zy,     \
                  double inv_h, std::span<double> out);                                \
  void ball_extremum(Shape s, std::span<const double> u,                               \
                     std::span<const std::array<int, 2>> offsets, bool take_max,       \
                     std::span<double> out);                                           \
  void squared_edt(Shape s, std::span<const std::uint8_t> mask, std::span<double> out); \
  double sum(std::span<const double> v);                                               \
  void prox_step(std::span<double> v, std::span<double> vbar, std::span<const double> divz, \
                 std::span<const double> psi, double tau, double inv_a, double theta);     \
  void hermite_flux(std::span<double> p, double lo, double step, std::span<const double> g, \
                    std::span<const double> dg);                                           \
  double dot(std::span<const double> a, std::span<const double> b);

namespace omp {
FACETFLOW_KERNEL_DECLS
}
namespace serial {
FACETFLOW_KERNEL_DECLS
}

#undef FACETFLOW_KERNEL_DECLS

}  // namespace facetflow::kernels
