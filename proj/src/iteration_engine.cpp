#include "halpern/iteration_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace halpern {

namespace {

constexpr std::uint64_t kMaxBatch = std::uint64_t{1} << 63;

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kMaxBatch / a) throw DomainError("batch size overflows 63 bits");
  return a * b;
}

std::uint64_t integer_power(std::uint64_t n, int e) {
  std::uint64_t out = 1;
  for (int i = 0; i < e; ++i) out = checked_mul(out, n);
  return out;
}

std::uint64_t ceil_to_batch(double v) {
  if (!std::isfinite(v) || v >= static_cast<double>(kMaxBatch)) throw DomainError("batch size overflows 63 bits");
  const double c = std::ceil(v);
  return c < 1.0 ? 1 : static_cast<std::uint64_t>(c);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

StepSchedule StepSchedule::km_constant(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("KMConstant: alpha must lie in (0, 1]");
  return StepSchedule(Kind::KMConstant, alpha);
}

StepSchedule StepSchedule::km_polynomial(double a) {
  if (!(a > 0.0 && a <= 1.0)) throw DomainError("KMPolynomial: exponent must lie in (0, 1]");
  return StepSchedule(Kind::KMPolynomial, a);
}

double StepSchedule::operator()(int n) const {
  if (n < 0) throw DomainError("StepSchedule: negative index");
  if (n == 0) return 0.0;
  const double nd = n;
  switch (kind_) {
    case Kind::HalpernClassic:
      return nd / (nd + 1.0);
    case Kind::HalpernShifted:
      return nd / (nd + 2.0);
    case Kind::KMConstant:
      return param_;
    case Kind::KMPolynomial:
      return std::pow(nd + 1.0, -param_);
  }
  return 0.0;
}

std::string StepSchedule::name() const {
  switch (kind_) {
    case Kind::HalpernClassic:
      return "halpern_classic";
    case Kind::HalpernShifted:
      return "halpern_shifted";
    case Kind::KMConstant:
      return "km_constant(" + fmt(param_) + ")";
    case Kind::KMPolynomial:
      return "km_polynomial(" + fmt(param_) + ")";
  }
  return "?";
}

BatchSchedule BatchSchedule::constant(std::uint64_t k) {
  if (k < 1) throw DomainError("BatchSchedule::constant: k must be >= 1");
  return BatchSchedule(Kind::Constant, 0.0, 0, 0.0, k);
}

BatchSchedule BatchSchedule::power(double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("BatchSchedule::power: exponent must be finite and >= 0");
  return BatchSchedule(Kind::Power, a, 0, 0.0);
}

BatchSchedule BatchSchedule::contractive_geometric(double gamma, int horizon) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("ContractiveGeometric: gamma must lie in (0, 1)");
  if (horizon < 1) throw DomainError("ContractiveGeometric: horizon must be >= 1");
  return BatchSchedule(Kind::ContractiveGeometric, 2.0, horizon, gamma);
}

std::uint64_t BatchSchedule::operator()(int n) const {
  if (n < 1) throw DomainError("BatchSchedule: index must be >= 1");
  const auto un = static_cast<std::uint64_t>(n);
  switch (kind_) {
    case Kind::Constant:
      return constant_;
    case Kind::Power:
      if (exponent_ == std::floor(exponent_) && exponent_ <= 64.0) {
        return integer_power(un, static_cast<int>(exponent_));
      }
      return ceil_to_batch(std::pow(static_cast<double>(n), exponent_));
    case Kind::ContractiveGeometric: {
      if (n > horizon_) throw DomainError("ContractiveGeometric: index beyond the horizon");
      const double nd = n;
      return ceil_to_batch(nd * nd * std::pow(gamma_, horizon_ - n));
    }
    case Kind::PowerSix:
      return integer_power(un, 6);
  }
  return 1;
}

std::string BatchSchedule::name() const {
  switch (kind_) {
    case Kind::Constant:
      return "constant(" + std::to_string(constant_) + ")";
    case Kind::Power:
      return "power(" + fmt(exponent_) + ")";
    case Kind::ContractiveGeometric:
      return "contractive_geometric(" + fmt(gamma_) + "," + std::to_string(horizon_) + ")";
    case Kind::PowerSix:
      return "power_six";
  }
  return "?";
}

RunRecord run_loop(const LoopSpec& spec, RngStream& rng) {
  if (spec.N < 1) throw DomainError("run_loop: N must be >= 1");
  if (!spec.step || !spec.batch || !spec.estimate || !spec.residual) {
    throw DomainError("run_loop: step, batch, estimate and residual are required");
  }
  if (spec.fixed_point && spec.fixed_point->size() != spec.x0.size()) {
    throw DomainError("run_loop: fixed point has the wrong dimension");
  }
  require_finite(spec.x0, "run_loop x0");
  if (spec.queries_per_unit < 1) throw DomainError("run_loop: queries_per_unit must be >= 1");

  RunRecord record;
  record.rows.reserve(static_cast<std::size_t>(spec.N) + 1);

  auto measure = [&](int n, const Vector& x, TraceRow& row) {
    row.n = n;
    row.residual = spec.residual(x);
    if (spec.fixed_point) row.dist_to_fp = norm(x - *spec.fixed_point, spec.norm);
  };

  Vector x = spec.x0;
  TraceRow first;
  measure(0, x, first);
  record.rows.push_back(first);
  if (spec.observer) spec.observer(0, x);

  std::uint64_t cum = 0;
  for (int n = 1; n <= spec.N; ++n) {
    const AffineStep coeff = spec.step(n);
    const std::uint64_t k = spec.batch(n);
    if (k < 1) throw DomainError("run_loop: batch size must be >= 1");
    if (k > std::numeric_limits<std::uint64_t>::max() / spec.queries_per_unit) {
      throw DomainError("run_loop: query count overflow");
    }
    const std::uint64_t charged = k * spec.queries_per_unit;
    if (cum > std::numeric_limits<std::uint64_t>::max() - charged) throw DomainError("run_loop: query count overflow");

    RngStream step_rng = rng.substream(static_cast<std::uint64_t>(n));
    const Vector e = spec.estimate(x, n, k, step_rng);

    TraceRow row;
    row.step = coeff.reported;
    row.batch = k;
    row.cum_queries = cum + charged;
    if (spec.estimate_mean && all_finite(e)) row.noise_norm = norm(e - spec.estimate_mean(x), spec.norm);

    Vector next = coeff.estimate * e;
    if (coeff.anchor != 0.0) next += coeff.anchor * spec.x0;
    if (coeff.previous != 0.0) next += coeff.previous * x;
    if (spec.flush_below > 0.0) {
      next = (next.array().abs() < spec.flush_below).select(0.0, next);
    }
    if (!all_finite(next)) {
      record.aborted = true;
      record.abort_message = "non-finite iterate at n = " + std::to_string(n);
      break;
    }
    x = std::move(next);
    cum += charged;
    measure(n, x, row);
    if (!std::isfinite(row.residual)) {
      record.aborted = true;
      record.abort_message = "non-finite residual at n = " + std::to_string(n);
      break;
    }
    record.rows.push_back(row);
    if (spec.observer) spec.observer(n, x);
    if (spec.query_budget && cum > *spec.query_budget) break;
  }
  record.final_iterate = x;
  return record;
}

namespace {

LoopSpec operator_loop(const OracleDescriptor& o, const Vector& x0, int N, const NormKind& norm_kind) {
  if (x0.size() != o.dim()) {
    throw DomainError("x0 has dimension " + std::to_string(x0.size()) + ", oracle expects " +
                      std::to_string(o.dim()));
  }
  LoopSpec spec;
  spec.x0 = x0;
  spec.N = N;
  spec.norm = norm_kind;
  const OperatorDescriptor& base = o.base();
  spec.residual = [&base, norm_kind](const Vector& x) { return norm(x - apply(base, x), norm_kind); };
  spec.estimate_mean = [&base](const Vector& x) { return apply(base, x); };
  spec.fixed_point = fixed_point_info(base).known_fixed_point;
  return spec;
}

}  // namespace

RunRecord halpern_run(const OracleDescriptor& o, const Vector& x0, const StepSchedule& steps,
                      const BatchSchedule& batches, int N, const NormKind& norm_kind, RngStream& rng) {
  if (!steps.is_halpern()) throw DomainError("halpern_run: step schedule " + steps.name() + " is not a Halpern kind");
  LoopSpec spec = operator_loop(o, x0, N, norm_kind);
  spec.step = [steps](int n) {
    const double beta = steps(n);
    return AffineStep{1.0 - beta, 0.0, beta, beta};
  };
  spec.batch = [batches](int n) { return batches(n); };
  spec.estimate = [&o](const Vector& x, int, std::uint64_t k, RngStream& r) { return minibatch(o, x, k, r); };
  return run_loop(spec, rng);
}

RunRecord km_run(const OracleDescriptor& o, const Vector& x0, const StepSchedule& steps, int N,
                 const NormKind& norm_kind, RngStream& rng) {
  if (steps.is_halpern()) throw DomainError("km_run: step schedule " + steps.name() + " is not a KM kind");
  LoopSpec spec = operator_loop(o, x0, N, norm_kind);
  spec.step = [steps](int n) {
    const double alpha = steps(n);
    return AffineStep{0.0, 1.0 - alpha, alpha, alpha};
  };
  spec.batch = [](int) -> std::uint64_t { return 1; };
  spec.estimate = [&o](const Vector& x, int, std::uint64_t, RngStream& r) { return query(o, x, r); };
  return run_loop(spec, rng);
}

double bound_nonexpansive(double kappa_bar, const std::vector<double>& sigma_seq, int N) {
  if (N < 1) throw DomainError("bound_nonexpansive: N must be >= 1");
  if (!(kappa_bar >= 0.0)) throw DomainError("bound_nonexpansive: kappa_bar must be >= 0");
  if (sigma_seq.size() < static_cast<std::size_t>(N)) {
    throw DomainError("bound_nonexpansive: sigma sequence shorter than N");
  }
  double harmonic = 0.0;
  double weighted = 0.0;
  for (int n = 1; n <= N; ++n) {
    const double s = sigma_seq[n - 1];
    if (!(s >= 0.0)) throw DomainError("bound_nonexpansive: sigma_n must be >= 0");
    harmonic += 1.0 / (n + 1.0);
    weighted += n * s;
  }
  return (kappa_bar + kappa_bar * harmonic + 2.0 * weighted) / (N + 1.0);
}

double bound_contractive(double dist0, double sigma, double gamma, int N) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("bound_contractive: gamma must lie in (0, 1)");
  if (!(dist0 >= 0.0) || !(sigma >= 0.0)) throw DomainError("bound_contractive: inputs must be >= 0");
  if (N < 1) throw DomainError("bound_contractive: N must be >= 1");
  return (dist0 + 2.0 * sigma) / ((1.0 - gamma) * (N + 1.0));
}

double kappa_bar_bounded_range(double M, const Vector& x0, const NormKind& norm_kind) {
  if (!(M >= 0.0)) throw DomainError("kappa_bar_bounded_range: M must be >= 0");
  return M + norm(x0, norm_kind);
}

double batch_exponent_h(double a) {
  if (!(a > 2.0)) throw DomainError("batch_exponent_h: a must exceed 2");
  if (a <= 4.0) return 2.0 * (a + 1.0) / (a - 2.0);
  return 1.0 + a;
}

std::vector<double> minibatch_sigma_sequence(double mu, double sigma, const BatchSchedule& batches, int N) {
  if (!(mu >= 1.0) || !(sigma >= 0.0)) throw DomainError("minibatch_sigma_sequence: need mu >= 1, sigma >= 0");
  std::vector<double> out(static_cast<std::size_t>(std::max(N, 0)));
  for (int n = 1; n <= N; ++n) out[n - 1] = mu * sigma / std::sqrt(static_cast<double>(batches(n)));
  return out;
}

}  // namespace halpern
