#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace halpern {

/// Point in R^d. Iterates, anchors, noise realizations and flattened
/// Q-tables all travel as this type.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an argument violates a documented precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which norm an operator, residual or bound is measured in.
class NormKind {
 public:
  enum class Tag { L1, L2, LInf, Lp };

  static NormKind l1() { return NormKind(Tag::L1, 1.0); }
  static NormKind l2() { return NormKind(Tag::L2, 2.0); }
  static NormKind linf() { return NormKind(Tag::LInf, INFINITY); }
  /// Requires 1 < p < inf.
  static NormKind lp(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) {
      throw DomainError("Lp norm needs a finite exponent p > 1, got " + std::to_string(p));
    }
    return NormKind(Tag::Lp, p);
  }

  Tag tag() const { return tag_; }
  /// Exponent for Lp; 1, 2 and +inf for the named norms.
  double exponent() const { return p_; }

  std::string name() const;
  /// Inverse of name(): "L1", "L2", "Linf", "L<p>" (e.g. "L3.5").
  static NormKind parse(const std::string& text);

  friend bool operator==(const NormKind& a, const NormKind& b) {
    return a.tag_ == b.tag_ && (a.tag_ != Tag::Lp || a.p_ == b.p_);
  }

 private:
  NormKind(Tag tag, double p) : tag_(tag), p_(p) {}
  Tag tag_;
  double p_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (!all_finite(v)) {
    throw DomainError(std::string(what) + ": non-finite entry");
  }
}

/// Exact norm of v. Throws DomainError on NaN or inf entries.
template <typename Derived>
typename Derived::Scalar norm(const Eigen::MatrixBase<Derived>& v, const NormKind& kind) {
  using Scalar = typename Derived::Scalar;
  require_finite(v, "norm");
  if (v.size() == 0) return Scalar(0);
  switch (kind.tag()) {
    case NormKind::Tag::L1:
      return v.template lpNorm<1>();
    case NormKind::Tag::L2:
      return v.norm();
    case NormKind::Tag::LInf:
      return v.template lpNorm<Eigen::Infinity>();
    case NormKind::Tag::Lp: {
      // scale by the max entry so |x_i / m|^p never overflows
      const Scalar m = v.template lpNorm<Eigen::Infinity>();
      if (m == Scalar(0)) return Scalar(0);
      const Scalar p = static_cast<Scalar>(kind.exponent());
      const Scalar s = (v.derived().array().abs() / m).pow(p).sum();
      return m * std::pow(s, Scalar(1) / p);
    }
  }
  return Scalar(0);
}

/// Smallest mu with ||x||_kind <= mu ||x||_2 on R^dim.
double norm_equivalence_mu(const NormKind& kind, int dim);

}  // namespace halpern
