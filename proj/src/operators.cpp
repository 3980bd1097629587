#include "halpern/operators.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace halpern {

namespace {

void check_gamma(double gamma, const char* who) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw DomainError(std::string(who) + ": gamma must lie in (0, 1]");
  }
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

double spectral_norm_power_iteration(const Matrix& A, double tol, int max_iterations) {
  if (A.size() == 0) return 0.0;
  const Matrix gram = A.transpose() * A;
  // Fixed pseudo-random start: a generic direction, reproducible run to run.
  RngStream rng(0x5eed, 0);
  Vector v(gram.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 0.5 + rng.uniform();
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Vector w = gram * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    w /= next;
    if (it > 0 && std::abs(next - estimate) <= tol * next) return std::sqrt(next);
    estimate = next;
    v = std::move(w);
  }
  throw std::runtime_error("spectral_norm_power_iteration: no convergence within " +
                           std::to_string(max_iterations) + " iterations");
}

double induced_norm_bound(const Matrix& A, const NormKind& norm) {
  const double col = A.cwiseAbs().colwise().sum().maxCoeff();
  const double row = A.cwiseAbs().rowwise().sum().maxCoeff();
  switch (norm.tag()) {
    case NormKind::Tag::L1:
      return col;
    case NormKind::Tag::LInf:
      return row;
    case NormKind::Tag::L2:
      return spectral_norm_power_iteration(A);
    case NormKind::Tag::Lp: {
      const double p = norm.exponent();
      return std::pow(col, 1.0 / p) * std::pow(row, 1.0 - 1.0 / p);
    }
  }
  return INFINITY;
}

OperatorDescriptor make_affine(Matrix A, Vector b, double gamma, NormKind norm) {
  check_gamma(gamma, "make_affine");
  if (A.rows() != A.cols() || A.rows() != b.size() || A.rows() < 1) {
    throw DomainError("make_affine: A must be square and match b");
  }
  require_finite(A, "make_affine matrix");
  require_finite(b, "make_affine offset");
  double bound = 0.0;
  try {
    bound = induced_norm_bound(A, norm);
  } catch (const std::runtime_error& e) {
    throw DomainError(std::string("make_affine: cannot certify gamma: ") + e.what());
  }
  if (bound > gamma * (1.0 + 1e-8)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "make_affine: operator norm " << bound << " under " << norm.name() << " exceeds gamma = " << gamma;
    throw DomainError(msg.str());
  }
  const int dim = static_cast<int>(b.size());
  return OperatorDescriptor(AffineMap{std::move(A), std::move(b)}, norm, gamma, dim);
}

OperatorDescriptor make_identity(int dim, NormKind norm) {
  if (dim < 1) throw DomainError("make_identity: dim must be >= 1");
  return make_affine(Matrix::Identity(dim, dim), Vector::Zero(dim), 1.0, norm);
}

OperatorDescriptor make_rotation(double angle, int dim) {
  if (dim < 2) throw DomainError("make_rotation: embedding dimension must be >= 2");
  if (!std::isfinite(angle)) throw DomainError("make_rotation: angle must be finite");
  return OperatorDescriptor(PlaneRotation{angle, dim}, NormKind::l2(), 1.0, dim);
}

OperatorDescriptor make_shift_projection(double lambda, int dim) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("make_shift_projection: lambda must be positive");
  if (dim < 1) throw DomainError("make_shift_projection: dim must be >= 1");
  return OperatorDescriptor(ShiftProjection{lambda, dim}, NormKind::l1(), 1.0, dim);
}

OperatorDescriptor make_bellman_discounted(MdpHandle mdp, double gamma) {
  if (!mdp) throw DomainError("make_bellman_discounted: null MDP");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("make_bellman_discounted: gamma must lie in (0, 1)");
  const int dim = mdp->num_pairs();
  return OperatorDescriptor(BellmanDiscountedMap{std::move(mdp), gamma}, NormKind::linf(), gamma, dim);
}

OperatorDescriptor make_bellman_average(MdpHandle mdp, double v_star) {
  if (!mdp) throw DomainError("make_bellman_average: null MDP");
  if (!std::isfinite(v_star)) throw DomainError("make_bellman_average: v_star must be finite");
  const int dim = mdp->num_pairs();
  return OperatorDescriptor(BellmanAverageMap{std::move(mdp), v_star}, NormKind::linf(), 1.0, dim);
}

OperatorDescriptor make_constant(Vector target, NormKind norm, double gamma) {
  check_gamma(gamma, "make_constant");
  if (target.size() < 1) throw DomainError("make_constant: empty target");
  require_finite(target, "make_constant target");
  const int dim = static_cast<int>(target.size());
  return OperatorDescriptor(ConstantMap{std::move(target)}, norm, gamma, dim);
}

std::string OperatorDescriptor::describe() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const AffineMap&) { out << "affine(dim=" << dim_ << ")"; },
                 [&](const PlaneRotation& r) { out << "rotation(angle=" << r.angle << ", dim=" << r.dim << ")"; },
                 [&](const ShiftProjection& s) { out << "shift_projection(lambda=" << s.lambda << ", dim=" << s.dim << ")"; },
                 [&](const BellmanDiscountedMap& b) { out << "bellman_discounted(gamma=" << b.gamma << ")"; },
                 [&](const BellmanAverageMap& b) { out << "bellman_average(v*=" << b.v_star << ")"; },
                 [&](const ConstantMap&) { out << "constant(dim=" << dim_ << ")"; },
             },
             kind_);
  out << " [" << norm_.name() << ", gamma=" << gamma_ << "]";
  return out.str();
}

Vector apply(const OperatorDescriptor& op, const Vector& x) {
  if (x.size() != op.dim()) {
    throw DomainError("apply: input has dimension " + std::to_string(x.size()) + ", operator expects " +
                      std::to_string(op.dim()));
  }
  return std::visit(
      Overloaded{
          [&](const AffineMap& m) -> Vector { return m.matrix * x + m.offset; },
          [&](const PlaneRotation& r) -> Vector {
            Vector out = x;
            const double c = std::cos(r.angle);
            const double s = std::sin(r.angle);
            out(0) = c * x(0) - s * x(1);
            out(1) = s * x(0) + c * x(1);
            return out;
          },
          [&](const ShiftProjection& s) -> Vector { return shift_map(project_box(x, s.lambda), s.lambda); },
          [&](const BellmanDiscountedMap& b) -> Vector {
            const auto& m = *b.mdp;
            return flatten(bellman_discounted(m, unflatten(x, m.num_states(), m.num_actions()), b.gamma));
          },
          [&](const BellmanAverageMap& b) -> Vector {
            const auto& m = *b.mdp;
            return flatten(bellman_average(m, unflatten(x, m.num_states(), m.num_actions()), b.v_star));
          },
          [&](const ConstantMap& c) -> Vector { return c.target; },
      },
      op.kind());
}

FixedPointInfo fixed_point_info(const OperatorDescriptor& op) {
  FixedPointInfo info;
  std::visit(Overloaded{
                 [&](const AffineMap& m) {
                   const Matrix lhs = Matrix::Identity(op.dim(), op.dim()) - m.matrix;
                   Eigen::FullPivLU<Matrix> lu(lhs);
                   if (lu.isInvertible()) {
                     info.known_fixed_point = lu.solve(m.offset);
                   } else {
                     const Vector particular = lu.solve(m.offset);
                     if ((lhs * particular - m.offset).norm() <= 1e-9 * (1.0 + m.offset.norm())) {
                       info.known_fixed_point_set_description =
                           "affine subspace of dimension " + std::to_string(lu.dimensionOfKernel());
                     } else {
                       info.known_fixed_point_set_description = "empty";
                     }
                   }
                 },
                 [&](const PlaneRotation& r) {
                   info.known_fixed_point = Vector::Zero(r.dim);
                   if (r.dim > 2) info.known_fixed_point_set_description = "all x with x_1 = x_2 = 0";
                 },
                 [&](const ShiftProjection& s) { info.known_fixed_point = Vector::Constant(s.dim, s.lambda / 2.0); },
                 [&](const BellmanDiscountedMap& b) {
                   info.known_fixed_point = flatten(solve_discounted_exact(*b.mdp, b.gamma, 1e-12).q_star);
                 },
                 [&](const BellmanAverageMap& b) {
                   info.known_fixed_point = flatten(solve_average_exact(*b.mdp, 1e-12).q_star);
                   info.known_fixed_point_set_description = "q_star + c e for every real c";
                 },
                 [&](const ConstantMap& c) { info.known_fixed_point = c.target; },
             },
             op.kind());
  return info;
}

}  // namespace halpern
