#include <doctest.h>

#include <cmath>

#include "halpern/q_learning.hpp"

using namespace halpern;

namespace {

TabularMDP three_state() {
  return make_mdp({{{0.6, 0.3, 0.1}, {0.1, 0.1, 0.8}},
                   {{0.2, 0.5, 0.3}, {0.5, 0.25, 0.25}},
                   {{0.3, 0.3, 0.4}, {0.05, 0.9, 0.05}}},
                  {{0.2, 0.9}, {0.5, 0.1}, {1.0, 0.3}});
}

TabularMDP deterministic_ring() {
  // 0 -> 1 -> 2 -> 0 under action 0; action 1 stays put.
  return make_mdp({{{0, 1, 0}, {1, 0, 0}}, {{0, 0, 1}, {0, 1, 0}}, {{1, 0, 0}, {0, 0, 1}}},
                  {{0.1, 0.4}, {0.9, 0.2}, {0.5, 0.6}});
}

TabularMDP self_loop() { return make_mdp({{{1.0}}}, {{1.0}}); }

}  // namespace

TEST_CASE("coupled Halpern and benchmark iterates differ by a constant table") {
  const auto m = three_state();
  const double v_star = solve_average_exact(m, 1e-12).v_star;
  QTable q0(3, 2);
  q0 << 0.5, -0.2, 0.0, 1.0, 0.3, 0.1;
  std::vector<QTable> halpern, bench;
  QOptions oh, ob;
  oh.v_star = ob.v_star = v_star;
  oh.observer = [&](int, const QTable& q) { halpern.push_back(q); };
  ob.observer = [&](int, const QTable& q) { bench.push_back(q); };
  RngStream r1(11, 0), r2(11, 0);
  halpern_q_average(m, AnchorFunction::max(), q0, 12, r1, oh);
  benchmark_q_average(m, v_star, q0, 12, r2, ob);
  REQUIRE(halpern.size() == bench.size());
  for (std::size_t n = 0; n < halpern.size(); ++n) {
    const QTable diff = halpern[n] - bench[n];
    CHECK(diff.maxCoeff() - diff.minCoeff() <= 1e-9);
  }
}

TEST_CASE("benchmark iterates grow at most linearly with rate g / 2") {
  const auto m = three_state();
  const double v_star = solve_average_exact(m, 1e-12).v_star;
  const double g = benchmark_growth_rate(m, v_star);
  CHECK(g == doctest::Approx(std::max(1.0 - v_star, v_star - 0.1)));
  const QTable q0 = QTable::Zero(3, 2);
  QOptions opts;
  opts.v_star = v_star;
  bool ok = true;
  opts.observer = [&](int n, const QTable& q) {
    ok = ok && q.cwiseAbs().maxCoeff() <= q0.cwiseAbs().maxCoeff() + 0.5 * n * g + 1e-12;
  };
  RngStream rng(12, 0);
  benchmark_q_average(m, v_star, q0, 15, rng, opts);
  CHECK(ok);
}

TEST_CASE("halpern average Q-learning on a single self-loop") {
  // H Q = 1 + Q - 1 = Q for every Q, so the residual is identically 0 and
  // Q^n = (Q^0 + n) / (n + 1).
  const auto m = self_loop();
  QTable q0(1, 1);
  q0 << 5.0;
  std::vector<double> values;
  QOptions opts;
  opts.observer = [&](int, const QTable& q) { values.push_back(q(0, 0)); };
  RngStream rng(13, 0);
  const auto run = halpern_q_average(m, AnchorFunction::max(), q0, 8, rng, opts);
  for (const auto& row : run.record.rows) CHECK(row.residual == 0.0);
  for (int n = 0; n <= 8; ++n) CHECK(values[n] == doctest::Approx((5.0 + n) / (n + 1.0)).epsilon(1e-15));
}

TEST_CASE("deterministic discounted Halpern run meets the noiseless contractive bound") {
  const auto m = deterministic_ring();
  const double gamma = 0.8;
  const QTable q0 = QTable::Zero(3, 2);
  RngStream rng(14, 0);
  const int N = 30;
  const auto run = halpern_q_discounted(m, gamma, q0, N, rng);
  const double dist0 = *run.record.rows[0].dist_to_fp;
  for (int n = 1; n <= N; ++n) {
    // Each horizon n is its own run; the noiseless bound applies to the last iterate.
    RngStream r(14, n);
    const auto rn = halpern_q_discounted(m, gamma, q0, n, r);
    CHECK(*rn.record.rows[n].dist_to_fp <= bound_contractive(dist0, 0.0, gamma, n) + 1e-12);
  }
}

TEST_CASE("vanilla Q-learning with unit step is value iteration on a deterministic MDP") {
  const auto m = deterministic_ring();
  const double gamma = 0.9;
  QTable q = QTable::Zero(3, 2);
  std::vector<QTable> iterates;
  QOptions opts;
  opts.observer = [&](int, const QTable& t) { iterates.push_back(t); };
  RngStream rng(15, 0);
  vanilla_q_discounted(m, gamma, StepSchedule::km_constant(1.0), q, 25, rng, opts);
  for (int n = 1; n <= 25; ++n) {
    q = bellman_discounted(m, q, gamma);
    CHECK((iterates[n] - q).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("RVI Q-learning charges one query per pair per step") {
  const auto m = three_state();
  RngStream rng(16, 0);
  const auto run = rvi_q_learning(m, AnchorFunction::mean(), 0.9, QTable::Zero(3, 2), 40, rng);
  for (const auto& row : run.record.rows) {
    CHECK(row.cum_queries == static_cast<std::uint64_t>(row.n) * 6);
    CHECK(row.step == doctest::Approx(row.n == 0 ? 0.0 : std::pow(row.n + 1.0, -0.9)));
  }
  CHECK_THROWS_AS(rvi_q_learning(m, AnchorFunction::mean(), 0.8, QTable::Zero(3, 2), 5, rng), DomainError);
}

TEST_CASE("halpern average run charges S*A*k_n queries with k_n = n^6") {
  const auto m = three_state();
  RngStream rng(17, 0);
  const auto run = halpern_q_average(m, AnchorFunction::max(), QTable::Zero(3, 2), 6, rng);
  std::uint64_t total = 0;
  for (int n = 1; n <= 6; ++n) {
    const std::uint64_t k = static_cast<std::uint64_t>(std::pow(n, 6) + 0.5);
    total += 6 * k;
    CHECK(run.record.rows[n].batch == k);
    CHECK(run.record.rows[n].cum_queries == total);
  }
}

TEST_CASE("discounted runners reject oversized starting tables") {
  const auto m = three_state();
  QTable q0 = QTable::Zero(3, 2);
  q0(1, 1) = 10.5;
  RngStream rng(18, 0);
  CHECK_THROWS_AS(halpern_q_discounted(m, 0.9, q0, 5, rng), DomainError);
  CHECK_THROWS_AS(vanilla_q_discounted(m, 0.9, StepSchedule::km_constant(0.5), q0, 5, rng), DomainError);
  q0(1, 1) = 10.0;
  CHECK_NOTHROW(halpern_q_discounted(m, 0.9, q0, 5, rng));
  CHECK_THROWS_AS(vanilla_q_discounted(m, 0.9, StepSchedule::halpern_classic(), q0, 5, rng), DomainError);
}

TEST_CASE("stochastic discounted Halpern converges toward Q*") {
  const auto m = three_state();
  const double gamma = 0.5;
  RngStream rng(19, 0);
  const auto run = halpern_q_discounted(m, gamma, QTable::Zero(3, 2), 200, rng);
  const double dist0 = *run.record.rows[0].dist_to_fp;
  CHECK(*run.record.rows.back().dist_to_fp < 0.1 * dist0);
}
