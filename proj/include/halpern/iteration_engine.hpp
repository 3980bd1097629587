#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "halpern/core_linalg.hpp"
#include "halpern/operators.hpp"
#include "halpern/oracle.hpp"
#include "halpern/rng.hpp"

namespace halpern {

/// Step sizes. Halpern kinds give beta_n (weight on the oracle output, with
/// 1 - beta_n on the anchor); KM kinds give alpha_n. Index 0 gives 0.
class StepSchedule {
 public:
  enum class Kind { HalpernClassic, HalpernShifted, KMConstant, KMPolynomial };

  /// beta_n = n / (n + 1)
  static StepSchedule halpern_classic() { return StepSchedule(Kind::HalpernClassic, 0.0); }
  /// beta_n = n / (n + 2)
  static StepSchedule halpern_shifted() { return StepSchedule(Kind::HalpernShifted, 0.0); }
  /// alpha_n = alpha, alpha in (0, 1]. alpha = 1 is plain Picard iteration.
  static StepSchedule km_constant(double alpha);
  /// alpha_n = (n + 1)^(-a), a in (0, 1]
  static StepSchedule km_polynomial(double a);

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }
  bool is_halpern() const { return kind_ == Kind::HalpernClassic || kind_ == Kind::HalpernShifted; }
  double operator()(int n) const;
  std::string name() const;

 private:
  StepSchedule(Kind kind, double param) : kind_(kind), param_(param) {}
  Kind kind_;
  double param_;
};

/// Minibatch sizes k_n for n >= 1; every emitted value is >= 1.
class BatchSchedule {
 public:
  enum class Kind { Constant, Power, ContractiveGeometric, PowerSix };

  static BatchSchedule constant(std::uint64_t k);
  /// k_n = ceil(n^a), a >= 0. Integer exponents are evaluated exactly.
  static BatchSchedule power(double a);
  /// k_n = ceil(n^2 gamma^(N - n)) for 1 <= n <= N.
  static BatchSchedule contractive_geometric(double gamma, int horizon);
  /// k_n = n^6 in exact integer arithmetic.
  static BatchSchedule power_six() { return BatchSchedule(Kind::PowerSix, 6.0, 0, 0.0); }

  Kind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  double gamma() const { return gamma_; }
  int horizon() const { return horizon_; }
  std::uint64_t constant_size() const { return constant_; }

  /// Throws DomainError for n < 1, for n beyond a geometric horizon, and
  /// when k_n does not fit in 63 bits.
  std::uint64_t operator()(int n) const;
  std::string name() const;

 private:
  BatchSchedule(Kind kind, double exponent, int horizon, double gamma, std::uint64_t constant = 1)
      : kind_(kind), exponent_(exponent), horizon_(horizon), gamma_(gamma), constant_(constant) {}
  Kind kind_;
  double exponent_;
  int horizon_;
  double gamma_;
  std::uint64_t constant_;
};

struct TraceRow {
  int n = 0;
  /// beta_n or alpha_n; 0 at n = 0.
  double step = 0.0;
  /// k_n; 0 at n = 0.
  std::uint64_t batch = 0;
  std::uint64_t cum_queries = 0;
  double residual = 0.0;
  std::optional<double> dist_to_fp;
  /// ||U_n||, the realized error of the minibatch estimate.
  std::optional<double> noise_norm;
};

struct RunRecord {
  /// Rows for n = 0, 1, ..., up to N or up to the last finite iterate.
  std::vector<TraceRow> rows;
  Vector final_iterate;
  bool aborted = false;
  std::string abort_message;
};

/// Coefficients of x^n = anchor * x^0 + previous * x^{n-1} + estimate * E_n.
struct AffineStep {
  double anchor = 0.0;
  double previous = 0.0;
  double estimate = 0.0;
  /// Value reported in the trace step column.
  double reported = 0.0;
};

/// Description of one run of the generic anchored/averaged iteration.
struct LoopSpec {
  Vector x0;
  int N = 1;
  std::function<AffineStep(int n)> step;
  std::function<std::uint64_t(int n)> batch;
  /// E_n from x^{n-1}, k_n and the per-iteration stream.
  std::function<Vector(const Vector& x_prev, int n, std::uint64_t k, RngStream& rng)> estimate;
  /// Exact mean of E_n given x^{n-1}; when set, the trace records ||E_n - mean||.
  std::function<Vector(const Vector& x_prev)> estimate_mean;
  /// Residual recorded per row.
  std::function<double(const Vector& x)> residual;
  NormKind norm = NormKind::l2();
  std::optional<Vector> fixed_point;
  /// Entries with |x_i| below this are set to exactly 0 after each step.
  double flush_below = 0.0;
  /// Called with every iterate, x^0 included.
  std::function<void(int n, const Vector& x)> observer;
  /// Oracle queries charged per unit of k_n (S*A for synchronous Q-learning).
  std::uint64_t queries_per_unit = 1;
  /// Stop after the step whose cumulative query count first exceeds this.
  std::optional<std::uint64_t> query_budget;
};

/// Iteration n draws from rng.substream(n), so runs sharing a stream see the
/// same samples at every step regardless of what they compute.
RunRecord run_loop(const LoopSpec& spec, RngStream& rng);

/// Stochastic Halpern iteration
///   x^n = (1 - beta_n) x^0 + beta_n minibatch(o, x^{n-1}, k_n),
/// residual ||x^n - T x^n|| measured with the exact operator under `norm`.
RunRecord halpern_run(const OracleDescriptor& o, const Vector& x0, const StepSchedule& steps,
                      const BatchSchedule& batches, int N, const NormKind& norm, RngStream& rng);

/// Krasnoselskii-Mann baseline x^n = (1 - alpha_n) x^{n-1} + alpha_n query(o, x^{n-1}).
RunRecord km_run(const OracleDescriptor& o, const Vector& x0, const StepSchedule& steps, int N,
                 const NormKind& norm, RngStream& rng);

/// (1/(N+1)) (kappa_bar + kappa_bar sum_{n=1..N} 1/(n+1) + 2 sum_{n=1..N} n sigma_n),
/// with sigma_seq[n-1] = sigma_n.
double bound_nonexpansive(double kappa_bar, const std::vector<double>& sigma_seq, int N);

/// (dist0 + 2 sigma) / ((1 - gamma)(N + 1))
double bound_contractive(double dist0, double sigma, double gamma, int N);

/// M + ||x0||
double kappa_bar_bounded_range(double M, const Vector& x0, const NormKind& norm);

/// Exponent of 1/eps in the oracle complexity of Power(a) batches.
double batch_exponent_h(double a);

/// sigma_n <= mu sigma / sqrt(k_n) for n = 1..N.
std::vector<double> minibatch_sigma_sequence(double mu, double sigma, const BatchSchedule& batches, int N);

}  // namespace halpern
