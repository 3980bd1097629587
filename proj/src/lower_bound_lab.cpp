#include "halpern/lower_bound_lab.hpp"

#include <algorithm>
#include <cmath>

namespace halpern {

namespace {

// Ratios such as 2 / 0.2 land a few ulps off the intended integer.
double snap_to_integer(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : v;
}

}  // namespace

AdversarialInstance build_instance(double epsilon, double kappa_bar, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("build_instance: sigma must be positive");
  if (!(epsilon > 0.0 && epsilon < sigma / 2.0)) throw DomainError("build_instance: need 0 < epsilon < sigma / 2");
  if (!(kappa_bar >= 2.0 * epsilon) || !std::isfinite(kappa_bar)) {
    throw DomainError("build_instance: need kappa_bar >= 2 epsilon");
  }
  AdversarialInstance inst;
  inst.epsilon = epsilon;
  inst.kappa_bar = kappa_bar;
  inst.sigma = sigma;
  inst.lambda = 2.0 * epsilon;
  const double d = std::floor(snap_to_integer(kappa_bar / inst.lambda));
  if (d > 1e7) throw DomainError("build_instance: dimension kappa_bar / lambda is too large");
  inst.d = static_cast<int>(d);
  inst.p = inst.lambda * inst.lambda / (sigma * sigma);
  const double ratio = snap_to_integer(inst.d / (2.0 * inst.p));
  inst.n_budget = static_cast<std::uint64_t>(std::ceil(ratio) - 1.0);
  return inst;
}

double phi(const Vector& x, int n, double lambda) {
  if (n < 1 || n > x.size()) throw DomainError("phi: need 1 <= n <= dim(x)");
  auto clamp = [lambda](double v) { return std::clamp(v, 0.0, lambda); };
  double out = std::abs(lambda - x(0));
  for (int i = 1; i < n; ++i) out += std::abs(clamp(x(i - 1)) - x(i));
  return out + clamp(x(n - 1));
}

SpanAlgorithm SpanAlgorithm::halpern_classic(BatchSchedule batches) {
  const StepSchedule steps = StepSchedule::halpern_classic();
  return SpanAlgorithm(
      [steps](int n) {
        const double beta = steps(n);
        return AffineStep{1.0 - beta, 0.0, beta, beta};
      },
      batches, "halpern_classic/" + batches.name());
}

SpanAlgorithm SpanAlgorithm::km_constant(double alpha, BatchSchedule batches) {
  const StepSchedule steps = StepSchedule::km_constant(alpha);
  return SpanAlgorithm([alpha](int) { return AffineStep{0.0, 1.0 - alpha, alpha, alpha}; }, batches,
                       steps.name() + "/" + batches.name());
}

SpanAlgorithm SpanAlgorithm::custom(std::function<AffineStep(int)> rule, BatchSchedule batches, std::string label) {
  if (!rule) throw DomainError("SpanAlgorithm::custom: empty rule");
  return SpanAlgorithm(std::move(rule), batches, std::move(label));
}

AdversarialTrace run_adversarial(const AdversarialInstance& inst, const SpanAlgorithm& algo, RngStream& rng) {
  const OracleDescriptor oracle = inst.oracle();
  const OperatorDescriptor& op = oracle.base();

  AdversarialTrace trace;
  std::vector<int> progress_seen;

  LoopSpec spec;
  spec.x0 = Vector::Zero(inst.d);
  // k_n >= 1, so the budget is crossed within n_budget + 1 steps.
  spec.N = static_cast<int>(std::min<std::uint64_t>(inst.n_budget + 1, 1u << 30));
  spec.norm = NormKind::l1();
  spec.step = [&algo](int n) { return algo.step(n); };
  spec.batch = [&algo](int n) { return algo.batches()(n); };
  spec.estimate = [&oracle](const Vector& x, int, std::uint64_t k, RngStream& r) { return minibatch(oracle, x, k, r); };
  spec.estimate_mean = [&op](const Vector& x) { return apply(op, x); };
  spec.residual = [&op](const Vector& x) { return norm(x - apply(op, x), NormKind::l1()); };
  spec.fixed_point = Vector::Constant(inst.d, inst.lambda / 2.0);
  spec.flush_below = 1e-300;
  spec.query_budget = inst.n_budget;
  spec.observer = [&progress_seen](int, const Vector& x) { progress_seen.push_back(prog(x)); };

  trace.record = run_loop(spec, rng);
  trace.rows.reserve(trace.record.rows.size());
  for (std::size_t i = 0; i < trace.record.rows.size(); ++i) {
    const TraceRow& row = trace.record.rows[i];
    AdversarialRow out;
    out.n = row.n;
    out.prog = progress_seen[i];
    out.cum_queries = row.cum_queries;
    out.residual = row.residual;
    out.within_budget = row.cum_queries <= inst.n_budget;
    trace.rows.push_back(out);
  }
  return trace;
}

}  // namespace halpern
