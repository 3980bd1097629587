#include "halpern/q_learning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace halpern {

namespace {

using TableMap = std::function<QTable(const QTable&)>;
using TableSampler = std::function<QTable(const QTable&, std::uint64_t k, RngStream& rng)>;

struct QLoop {
  std::function<AffineStep(int)> step;
  std::function<std::uint64_t(int)> batch;
  TableSampler estimate;
  TableMap mean;
  std::function<double(const QTable&)> residual;
  std::optional<QTable> fixed_point;
};

QRun run_q(const TabularMDP& m, const QTable& q0, int N, RngStream& rng, const QOptions& opts, const QLoop& loop) {
  check_shape(m, q0, "Q-learning initial table");
  require_finite(q0, "Q-learning initial table");
  const int S = m.num_states();
  const int A = m.num_actions();

  LoopSpec spec;
  spec.x0 = flatten(q0);
  spec.N = N;
  spec.norm = NormKind::linf();
  spec.step = loop.step;
  spec.batch = loop.batch;
  spec.queries_per_unit = static_cast<std::uint64_t>(m.num_pairs());
  spec.estimate = [&](const Vector& x, int, std::uint64_t k, RngStream& r) {
    return flatten(loop.estimate(unflatten(x, S, A), k, r));
  };
  spec.estimate_mean = [&](const Vector& x) { return flatten(loop.mean(unflatten(x, S, A))); };
  spec.residual = [&](const Vector& x) { return loop.residual(unflatten(x, S, A)); };
  if (loop.fixed_point) spec.fixed_point = flatten(*loop.fixed_point);
  if (opts.observer) {
    spec.observer = [&](int n, const Vector& x) { opts.observer(n, unflatten(x, S, A)); };
  }

  QRun out;
  out.record = run_loop(spec, rng);
  out.q = unflatten(out.record.final_iterate, S, A);
  return out;
}

AffineStep halpern_step(int n) {
  const double beta = StepSchedule::halpern_classic()(n);
  return AffineStep{1.0 - beta, 0.0, beta, beta};
}

double measured_gain(const TabularMDP& m, const QOptions& opts) {
  return opts.v_star ? *opts.v_star : solve_average_exact(m, opts.exact_tol).v_star;
}

std::function<double(const QTable&)> average_residual(const TabularMDP& m, double v_star) {
  return [&m, v_star](const QTable& q) { return (bellman_average(m, q, v_star) - q).cwiseAbs().maxCoeff(); };
}

void check_discounted_start(const TabularMDP& m, double gamma, const QTable& q0, const char* who) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError(std::string(who) + ": gamma must lie in (0, 1)");
  check_shape(m, q0, who);
  const double limit = m.r_max() / (1.0 - gamma);
  const double size = q0.cwiseAbs().maxCoeff();
  if (size > limit) {
    std::ostringstream msg;
    msg.precision(17);
    msg << who << ": ||Q0||_inf = " << size << " exceeds r_max / (1 - gamma) = " << limit;
    throw DomainError(msg.str());
  }
}

QLoop discounted_loop(const TabularMDP& m, double gamma, const QOptions& opts) {
  QLoop loop;
  loop.estimate = [&m, gamma](const QTable& q, std::uint64_t k, RngStream& r) {
    QTable out = m.rewards();
    out += gamma * sampled_next_values(m, q, k, r);
    return out;
  };
  loop.mean = [&m, gamma](const QTable& q) { return bellman_discounted(m, q, gamma); };
  loop.residual = [&m, gamma](const QTable& q) { return (bellman_discounted(m, q, gamma) - q).cwiseAbs().maxCoeff(); };
  loop.fixed_point = opts.q_star ? *opts.q_star : solve_discounted_exact(m, gamma, opts.exact_tol).q_star;
  return loop;
}

// r + (1/k) sum_i max Q(s_i, .) - shift(Q), and its exact mean.
void set_average_maps(QLoop& loop, const TabularMDP& m, std::function<double(const QTable&)> shift) {
  loop.estimate = [&m, shift](const QTable& q, std::uint64_t k, RngStream& r) {
    QTable out = m.rewards() + sampled_next_values(m, q, k, r);
    out.array() -= shift(q);
    return out;
  };
  loop.mean = [&m, shift](const QTable& q) { return bellman_average(m, q, shift(q)); };
}

}  // namespace

QRun halpern_q_average(const TabularMDP& m, const AnchorFunction& f, const QTable& q0, int N, RngStream& rng,
                       const QOptions& opts) {
  const BatchSchedule batches = opts.batches.value_or(BatchSchedule::power_six());
  QLoop loop;
  loop.step = halpern_step;
  loop.batch = [batches](int n) { return batches(n); };
  set_average_maps(loop, m, [f](const QTable& q) { return f(q); });
  loop.residual = average_residual(m, measured_gain(m, opts));
  return run_q(m, q0, N, rng, opts, loop);
}

QRun benchmark_q_average(const TabularMDP& m, double v_star, const QTable& q0, int N, RngStream& rng,
                         const QOptions& opts) {
  if (!std::isfinite(v_star)) throw DomainError("benchmark_q_average: v_star must be finite");
  const BatchSchedule batches = opts.batches.value_or(BatchSchedule::power_six());
  QLoop loop;
  loop.step = halpern_step;
  loop.batch = [batches](int n) { return batches(n); };
  set_average_maps(loop, m, [v_star](const QTable&) { return v_star; });
  loop.residual = average_residual(m, opts.v_star.value_or(v_star));
  return run_q(m, q0, N, rng, opts, loop);
}

QRun halpern_q_discounted(const TabularMDP& m, double gamma, const QTable& q0, int N, RngStream& rng,
                          const QOptions& opts) {
  check_discounted_start(m, gamma, q0, "halpern_q_discounted");
  const BatchSchedule batches = opts.batches.value_or(BatchSchedule::contractive_geometric(gamma, N));
  QLoop loop = discounted_loop(m, gamma, opts);
  loop.step = halpern_step;
  loop.batch = [batches](int n) { return batches(n); };
  return run_q(m, q0, N, rng, opts, loop);
}

QRun rvi_q_learning(const TabularMDP& m, const AnchorFunction& f, double a_exponent, const QTable& q0, int N,
                    RngStream& rng, const QOptions& opts) {
  if (!(a_exponent > 0.8 && a_exponent <= 1.0)) throw DomainError("rvi_q_learning: exponent must lie in (4/5, 1]");
  const StepSchedule alpha = StepSchedule::km_polynomial(a_exponent);
  const BatchSchedule batches = opts.batches.value_or(BatchSchedule::constant(1));
  QLoop loop;
  loop.step = [alpha](int n) {
    const double a = alpha(n);
    return AffineStep{0.0, 1.0 - a, a, a};
  };
  loop.batch = [batches](int n) { return batches(n); };
  set_average_maps(loop, m, [f](const QTable& q) { return f(q); });
  loop.residual = average_residual(m, measured_gain(m, opts));
  return run_q(m, q0, N, rng, opts, loop);
}

QRun vanilla_q_discounted(const TabularMDP& m, double gamma, const StepSchedule& alpha, const QTable& q0, int N,
                          RngStream& rng, const QOptions& opts) {
  if (alpha.is_halpern()) throw DomainError("vanilla_q_discounted: step schedule must be a KM kind");
  check_discounted_start(m, gamma, q0, "vanilla_q_discounted");
  const BatchSchedule batches = opts.batches.value_or(BatchSchedule::constant(1));
  QLoop loop = discounted_loop(m, gamma, opts);
  loop.step = [alpha](int n) {
    const double a = alpha(n);
    return AffineStep{0.0, 1.0 - a, a, a};
  };
  loop.batch = [batches](int n) { return batches(n); };
  return run_q(m, q0, N, rng, opts, loop);
}

double benchmark_growth_rate(const TabularMDP& m, double v_star) {
  return std::max(m.r_max() - v_star, v_star - m.r_min());
}

}  // namespace halpern
