#pragma once

#include <functional>
#include <optional>

#include "halpern/iteration_engine.hpp"
#include "halpern/mdp_model.hpp"
#include "halpern/rng.hpp"

namespace halpern {

struct QRun {
  QTable q;
  RunRecord record;
};

/// Knobs shared by the synchronous Q-learning runners. Cumulative queries
/// count transitions: k_n samples for each of the S*A pairs.
struct QOptions {
  /// Replaces the algorithm's own batch schedule when set.
  std::optional<BatchSchedule> batches;
  /// v* used to measure ||HQ - Q||_inf; solved with solve_average_exact when unset.
  std::optional<double> v_star;
  /// Q* used for distances; solved with solve_discounted_exact when unset.
  std::optional<QTable> q_star;
  /// Tolerance for the exact solvers invoked above.
  double exact_tol = 1e-10;
  /// Called with every iterate, Q^0 included.
  std::function<void(int n, const QTable& q)> observer;
};

/// Halpern synchronous Q-learning, average reward:
///   M_n Q(s,a) = r(s,a) + (1/k_n) sum_i max_a' Q(s_i, a') - f(Q),
///   Q^n = (1 - beta_n) Q^0 + beta_n M_n Q^{n-1},  beta_n = n/(n+1), k_n = n^6.
/// Records ||HQ^n - Q^n||_inf.
QRun halpern_q_average(const TabularMDP& m, const AnchorFunction& f, const QTable& q0, int N, RngStream& rng,
                       const QOptions& opts = {});

/// As halpern_q_average with the known v* subtracted in place of f(Q).
/// Meant for analysis: it needs the exact gain.
QRun benchmark_q_average(const TabularMDP& m, double v_star, const QTable& q0, int N, RngStream& rng,
                         const QOptions& opts = {});

/// Halpern synchronous Q-learning, discounted:
///   Q^n = (1 - beta_n) Q^0 + beta_n (r + gamma (1/k_n) sum_i max_a' Q^{n-1}(s_i, a')),
///   k_n = ceil(n^2 gamma^(N-n)).
/// Requires ||Q^0||_inf <= r_max / (1 - gamma). Records ||TQ^n - Q^n||_inf and ||Q^n - Q*||_inf.
QRun halpern_q_discounted(const TabularMDP& m, double gamma, const QTable& q0, int N, RngStream& rng,
                          const QOptions& opts = {});

/// RVI Q-learning, one sample per pair per step:
///   Q^n = (1 - alpha_n) Q^{n-1} + alpha_n (r + max_a' Q^{n-1}(s_n, a') - f(Q^{n-1})),
///   alpha_n = (n + 1)^(-a), a in (4/5, 1].
QRun rvi_q_learning(const TabularMDP& m, const AnchorFunction& f, double a_exponent, const QTable& q0, int N,
                    RngStream& rng, const QOptions& opts = {});

/// Classical synchronous Q-learning, discounted, one sample per pair per step.
/// `alpha` must be a KM schedule. Requires ||Q^0||_inf <= r_max / (1 - gamma).
QRun vanilla_q_discounted(const TabularMDP& m, double gamma, const StepSchedule& alpha, const QTable& q0, int N,
                          RngStream& rng, const QOptions& opts = {});

/// Per-step growth rate g of the benchmark iterates,
/// ||Q_v^n||_inf <= ||Q^0||_inf + (n/2) g, with g = max |r(s,a) - v*|.
double benchmark_growth_rate(const TabularMDP& m, double v_star);

}  // namespace halpern
