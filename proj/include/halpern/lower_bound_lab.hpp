#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "halpern/core_linalg.hpp"
#include "halpern/iteration_engine.hpp"
#include "halpern/operators.hpp"
#include "halpern/oracle.hpp"
#include "halpern/rng.hpp"

namespace halpern {

/// Hard instance for span algorithms: the shift-projection map on
/// ([0, lambda]^d, ||.||_1) behind a resistant Bernoulli oracle.
struct AdversarialInstance {
  double epsilon = 0.0;
  double kappa_bar = 0.0;
  double sigma = 0.0;
  double lambda = 0.0;  ///< 2 epsilon
  int d = 0;            ///< floor(kappa_bar / lambda)
  double p = 0.0;       ///< lambda^2 / sigma^2
  /// The integer N with N < d / (2p) <= N + 1.
  std::uint64_t n_budget = 0;

  OperatorDescriptor op() const { return make_shift_projection(lambda, d); }
  OracleDescriptor oracle() const { return OracleDescriptor(op(), ResistantBernoulli{p}); }
};

/// Throws DomainError unless 0 < epsilon < sigma / 2 and kappa_bar >= 2 epsilon.
AdversarialInstance build_instance(double epsilon, double kappa_bar, double sigma);

/// Largest 1-based index of a nonzero entry; 0 for the zero vector.
inline int prog(const Vector& x) { return progress(x); }

/// |lambda - x_1| + sum_{i=2..n} |P(x_{i-1}) - x_i| + P(x_n) with P the clamp
/// to [0, lambda]. Equals ||x - Tx||_1 when prog(x) = n < d, and is >= lambda.
double phi(const Vector& x, int n, double lambda);

/// Update rule confined to span{x^0, ..., x^{n-1}, minibatch output}.
class SpanAlgorithm {
 public:
  static SpanAlgorithm halpern_classic(BatchSchedule batches);
  static SpanAlgorithm km_constant(double alpha, BatchSchedule batches = BatchSchedule::constant(1));
  /// x^n = anchor x^0 + previous x^{n-1} + estimate * minibatch.
  static SpanAlgorithm custom(std::function<AffineStep(int n)> rule, BatchSchedule batches, std::string label);

  const BatchSchedule& batches() const { return batches_; }
  AffineStep step(int n) const { return rule_(n); }
  const std::string& name() const { return name_; }

 private:
  SpanAlgorithm(std::function<AffineStep(int)> rule, BatchSchedule batches, std::string name)
      : rule_(std::move(rule)), batches_(batches), name_(std::move(name)) {}
  std::function<AffineStep(int)> rule_;
  BatchSchedule batches_;
  std::string name_;
};

struct AdversarialRow {
  int n = 0;
  int prog = 0;
  std::uint64_t cum_queries = 0;
  double residual = 0.0;  ///< ||x^n - T x^n||_1
  bool within_budget = true;
};

struct AdversarialTrace {
  std::vector<AdversarialRow> rows;
  RunRecord record;
};

/// Runs from x^0 = 0 until the cumulative query count first exceeds the
/// instance budget; the last row is the first infeasible one. Entries below
/// 1e-300 in magnitude are flushed to 0 so prog stays meaningful.
AdversarialTrace run_adversarial(const AdversarialInstance& inst, const SpanAlgorithm& algo, RngStream& rng);

}  // namespace halpern
