#pragma once

#include <optional>
#include <string>
#include <variant>

#include "halpern/core_linalg.hpp"
#include "halpern/mdp_model.hpp"

namespace halpern {

/// Coordinatewise projection onto the box [0, lambda]^d.
template <typename Derived>
typename Derived::PlainObject project_box(const Eigen::MatrixBase<Derived>& x,
                                          typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (!(lambda > Scalar(0))) throw DomainError("project_box: lambda must be positive");
  return x.cwiseMax(Scalar(0)).cwiseMin(lambda);
}

/// Q(y_1, ..., y_d) = (lambda - y_d, y_1, ..., y_{d-1}); an L1 isometry.
template <typename Derived>
typename Derived::PlainObject shift_map(const Eigen::MatrixBase<Derived>& y,
                                        typename Derived::Scalar lambda) {
  const Eigen::Index d = y.size();
  if (d < 1) throw DomainError("shift_map: dimension must be >= 1");
  typename Derived::PlainObject out(d);
  out(0) = lambda - y(d - 1);
  out.tail(d - 1) = y.head(d - 1);
  return out;
}

/// x -> A x + b.
struct AffineMap {
  Matrix matrix;
  Vector offset;
};

/// Rotation by `angle` in the plane of the first two coordinates of R^dim,
/// identity on the rest.
struct PlaneRotation {
  double angle = 0.0;
  int dim = 2;
};

/// T = Q o P_C on (R^d, ||.||_1), the bounded-range nonexpansive map of the
/// lower-bound construction. Unique fixed point (lambda/2, ..., lambda/2).
struct ShiftProjection {
  double lambda = 1.0;
  int dim = 1;
};

/// Discounted Bellman operator acting on flattened Q-tables.
struct BellmanDiscountedMap {
  MdpHandle mdp;
  double gamma = 0.9;
};

/// Average-reward Bellman operator H acting on flattened Q-tables.
struct BellmanAverageMap {
  MdpHandle mdp;
  double v_star = 0.0;
};

struct ConstantMap {
  Vector target;
};

using OperatorKind =
    std::variant<AffineMap, PlaneRotation, ShiftProjection, BellmanDiscountedMap, BellmanAverageMap, ConstantMap>;

/// Deterministic operator with a declared Lipschitz constant under a declared
/// norm. Immutable once built; construct through the make_* factories, which
/// certify the declared constant.
class OperatorDescriptor {
 public:
  const OperatorKind& kind() const { return kind_; }
  const NormKind& declared_norm() const { return norm_; }
  /// Lipschitz constant in (0, 1]; 1 means nonexpansive.
  double gamma() const { return gamma_; }
  int dim() const { return dim_; }
  bool is_contraction() const { return gamma_ < 1.0; }
  std::string describe() const;

  friend OperatorDescriptor make_affine(Matrix A, Vector b, double gamma, NormKind norm);
  friend OperatorDescriptor make_rotation(double angle, int dim);
  friend OperatorDescriptor make_shift_projection(double lambda, int dim);
  friend OperatorDescriptor make_bellman_discounted(MdpHandle mdp, double gamma);
  friend OperatorDescriptor make_bellman_average(MdpHandle mdp, double v_star);
  friend OperatorDescriptor make_constant(Vector target, NormKind norm, double gamma);

 private:
  OperatorDescriptor(OperatorKind kind, NormKind norm, double gamma, int dim)
      : kind_(std::move(kind)), norm_(norm), gamma_(gamma), dim_(dim) {}

  OperatorKind kind_;
  NormKind norm_;
  double gamma_;
  int dim_;
};

/// Throws DomainError unless the induced norm of A is certified <= gamma.
/// L1 and Linf are exact (column / row sums); L2 runs power iteration on
/// A^T A to relative change 1e-8 within 10000 steps; Lp uses the
/// Riesz-Thorin bound ||A||_1^(1/p) ||A||_inf^(1-1/p).
OperatorDescriptor make_affine(Matrix A, Vector b, double gamma, NormKind norm);
OperatorDescriptor make_rotation(double angle, int dim = 2);
OperatorDescriptor make_shift_projection(double lambda, int dim);
OperatorDescriptor make_bellman_discounted(MdpHandle mdp, double gamma);
OperatorDescriptor make_bellman_average(MdpHandle mdp, double v_star);
OperatorDescriptor make_constant(Vector target, NormKind norm = NormKind::l2(), double gamma = 1.0);
/// Identity on R^dim as the affine map (I, 0) with gamma = 1.
OperatorDescriptor make_identity(int dim, NormKind norm = NormKind::l2());

/// Largest singular value of A by power iteration on A^T A.
/// Throws std::runtime_error if the relative change does not fall below
/// tol within max_iterations.
double spectral_norm_power_iteration(const Matrix& A, double tol = 1e-8, int max_iterations = 10000);

/// Certified upper bound on the operator norm of A induced by `norm`.
double induced_norm_bound(const Matrix& A, const NormKind& norm);

/// T x. Throws DomainError on a dimension mismatch.
Vector apply(const OperatorDescriptor& op, const Vector& x);

struct FixedPointInfo {
  std::optional<Vector> known_fixed_point;
  std::optional<std::string> known_fixed_point_set_description;
};

/// A known fixed point when one is available in closed form or by an exact
/// solver. Singular (I - A) for a nonexpansive affine map yields no point.
FixedPointInfo fixed_point_info(const OperatorDescriptor& op);

}  // namespace halpern
