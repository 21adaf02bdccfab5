#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "facetflow/anisotropy.hpp"
#include "facetflow/torus_grid.hpp"

namespace facetflow {

/// Set of grid nodes.
class Mask {
 public:
  explicit Mask(const Grid& grid, bool fill = false) : grid_(grid), bits_(grid.size(), fill) {}
  Mask(const Grid& grid, std::vector<std::uint8_t> bits);

  template <class Pred>
  static Mask where(const GridFunction& u, Pred&& pred) {
    Mask m(u.grid());
    for (std::size_t k = 0; k < u.size(); ++k) m.bits_[k] = pred(u[k]) ? 1 : 0;
    return m;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  void set(std::size_t k, bool v) { bits_[k] = v ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  Mask complement() const;
  Mask operator&(const Mask& o) const;
  Mask operator|(const Mask& o) const;
  bool subset_of(const Mask& o) const;
  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Grid grid_;
  std::vector<std::uint8_t> bits_;
};

/// Euclidean torus distance from every node to the nearest node of A
/// (exact distance transform); +infinity everywhere when A is empty.
GridFunction distance_to(const Mask& a);

/// rho > 0: nodes within distance rho of A (closed-ball dilation);
/// rho = 0: A; rho < 0: nodes whose closed |rho|-ball lies in A. Computed as
/// the complement of the dilation of A^c, so complement duality is exact.
Mask rho_neighborhood(const Mask& a, double rho);

struct SignedDistance {
  GridFunction values;
  /// A or its complement is empty; values are then +1 or -1 everywhere,
  /// beyond any torus distance.
  bool saturated = false;
};

/// d_A = dist(x, A) - dist(x, A^c): negative inside, positive outside.
SignedDistance signed_distance(const Mask& a);

/// Ordered pair (A-, A+) of disjoint node sets.
class PairOfSets {
 public:
  /// Throws PreconditionError when the sets intersect.
  PairOfSets(Mask minus, Mask plus);
  explicit PairOfSets(const Grid& grid) : minus_(grid), plus_(grid) {}

  const Grid& grid() const { return minus_.grid(); }
  const Mask& minus() const { return minus_; }
  const Mask& plus() const { return plus_; }
  /// Complement of A- u A+: the facet of any support function.
  Mask facet() const { return (minus_ | plus_).complement(); }
  friend bool operator==(const PairOfSets&, const PairOfSets&) = default;

 private:
  Mask minus_;
  Mask plus_;
};

/// ({u < 0}, {u > 0}).
PairOfSets pair_of(const GridFunction& u);
/// P <= Q iff P+ in Q+ and Q- in P-.
bool pair_leq(const PairOfSets& p, const PairOfSets& q);
/// -(A-, A+) = (A+, A-).
PairOfSets pair_reverse(const PairOfSets& p);
/// (U^{-rho}(A-), U^{rho}(A+)).
PairOfSets pair_nbhd(const PairOfSets& p, double rho);

/// Smallest torus distance between nodes of a and b; +infinity if either is
/// empty.
double set_distance(const Mask& a, const Mask& b);

/// Smooth pair between two neighborhoods of P, built from sublevel sets of
/// mollified distances with delta = (rho2 - rho1)/3:
/// U^{rho1}(P) <= (G-, G+) <= U^{rho2}(P) and dist(G-, G+) >= delta - 2h.
/// Throws DomainError when delta < h.
PairOfSets smooth_pair_between(const PairOfSets& p, double rho1, double rho2);

/// Support function psi of a pair with a Cahn-Hoffman field z on the edges
/// of the forward-difference gradient.
struct SupportFunctionCertificate {
  GridFunction psi;
  PairOfSets pair;
  GridVectorField z;
  /// Cutoff width of the construction (max |psi| before any rescaling).
  double delta = 0.0;
};

/// Cutoff construction psi = chi(d_{G+^c}) - chi(d_{G-^c}) with chi(s) =
/// max(0, min(delta, s)) and d the signed distance, delta = min(smoothness
/// radius, dist(G-, G+))/3. The smoothness radius is the largest r in
/// [6h, 3/4] such that G+-, G+-^c are unions of closed r-balls up to 1.5h. z = grad W(grad psi)
/// where the discrete gradient of psi is nonzero and the plateau field
/// theta(d_{G+^c}) grad W(grad d_{G+^c}) + theta(d_{G-^c}) grad W(-grad d_{G-^c})
/// elsewhere. Throws PreconditionError when dist(G-, G+) < 6h.
SupportFunctionCertificate support_from_smooth_pair(const PairOfSets& g, const Anisotropy& w);

struct AdmissibilityReport {
  std::size_t nodes = 0;
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  std::size_t worst_node = 0;
  double worst_defect = 0.0;
  double max_divergence = 0.0;
  bool divergence_finite = true;
  bool sign_pattern_ok = true;

  bool passed(double budget = 0.005) const {
    return sign_pattern_ok && divergence_finite && violation_fraction <= budget;
  }
};

/// Node-wise audit: z in dW(grad psi) (Wulff test where grad psi = 0),
/// divergence of z finite, psi's signs match the pair.
AdmissibilityReport admissibility_check(const SupportFunctionCertificate& cert,
                                        const Anisotropy& w, double tol = 1e-9);

/// Support function psi = alpha [psi_H]+ - beta [psi_H]- of H with
/// theta <= psi, where alpha = max theta / min_{G+} psi_H (1 if G+ is empty)
/// and beta = max_{H-} theta / min psi_H (1 if H- is empty), (G-, G+) =
/// pair_of(theta). psi_H is hat when given (its field z is reused, so the
/// curvature is unchanged) and support_from_smooth_pair(H) otherwise.
/// Throws PreconditionError unless pair_of(theta) <= U^{-2h}(H).
SupportFunctionCertificate ordered_support_function(
    const GridFunction& theta, const PairOfSets& h, const Anisotropy& w,
    const std::optional<SupportFunctionCertificate>& hat = std::nullopt);

/// alpha [psi]+ - beta [psi]-.
GridFunction rescale_parts(const GridFunction& psi, double alpha, double beta);

}  // namespace facetflow
