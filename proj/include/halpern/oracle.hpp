#pragma once

#include <cstdint>
#include <variant>

#include "halpern/core_linalg.hpp"
#include "halpern/operators.hpp"
#include "halpern/rng.hpp"

namespace halpern {

struct NoNoise {};

/// Tx + e * Z with Z standard normal, independently per coordinate.
struct GaussianNoise {
  double stddev = 0.0;
};

/// Reveals the next coordinate of a shift-projection map only on a
/// Bernoulli(p) success, rescaled by 1/p so the oracle stays unbiased.
struct ResistantBernoulli {
  double p = 0.5;
};

/// Bellman operators evaluated with sampled next states s' ~ p(. | s, a),
/// one sample per state-action pair per query.
struct MdpGenerative {};

using NoiseModel = std::variant<NoNoise, GaussianNoise, ResistantBernoulli, MdpGenerative>;

/// Unbiased randomized evaluator of a base operator.
class OracleDescriptor {
 public:
  /// Throws DomainError when the noise model cannot attach to `base`
  /// (ResistantBernoulli needs a ShiftProjection, MdpGenerative a Bellman map).
  OracleDescriptor(OperatorDescriptor base, NoiseModel noise);

  const OperatorDescriptor& base() const { return base_; }
  const NoiseModel& noise() const { return noise_; }
  int dim() const { return base_.dim(); }

 private:
  OperatorDescriptor base_;
  NoiseModel noise_;
};

/// Largest index i (1-based) with x_i != 0, or 0 for the zero vector.
int progress(const Vector& x);

/// Minibatches up to this size are drawn query by query; beyond it the
/// batch mean is drawn from its exact sampling distribution (a Gaussian with
/// variance e^2/k, a Binomial success count, a multinomial next-state count).
inline constexpr std::uint64_t kExplicitBatchLimit = 1024;

/// One sample of the oracle at x.
Vector query(const OracleDescriptor& o, const Vector& x, RngStream& rng);

/// Mean of k independent queries at x. Throws DomainError for k = 0.
Vector minibatch(const OracleDescriptor& o, const Vector& x, std::uint64_t k, RngStream& rng);

struct OracleMoments {
  Vector mean;
  /// Sample mean of ||query - Tx||_2^2.
  double second_moment = 0.0;
};

/// m single queries; m >= 2.
OracleMoments empirical_moments(const OracleDescriptor& o, const Vector& x, int m, RngStream& rng);

}  // namespace halpern
