#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "halpern/mdp_model.hpp"

using namespace halpern;

namespace {

TabularMDP three_state() {
  return make_mdp({{{0.6, 0.3, 0.1}, {0.1, 0.1, 0.8}},
                   {{0.2, 0.5, 0.3}, {0.5, 0.25, 0.25}},
                   {{0.3, 0.3, 0.4}, {0.05, 0.9, 0.05}}},
                  {{0.2, 0.9}, {0.5, 0.1}, {1.0, 0.3}});
}

// Deterministic MDP: action a in state s moves to next[s][a].
TabularMDP deterministic(const std::vector<std::vector<int>>& next, const std::vector<std::vector<double>>& r) {
  const int S = static_cast<int>(next.size());
  std::vector<std::vector<std::vector<double>>> p(S);
  for (int s = 0; s < S; ++s) {
    for (int t : next[s]) {
      std::vector<double> row(S, 0.0);
      row[t] = 1.0;
      p[s].push_back(row);
    }
  }
  return make_mdp(p, r);
}

// Best average reward from each state of a deterministic MDP: every
// stationary policy traces a path into a cycle, and the gain is the mean
// reward around that cycle.
std::vector<double> cycle_enumeration_gain(const std::vector<std::vector<int>>& next,
                                           const std::vector<std::vector<double>>& r) {
  const int S = static_cast<int>(next.size());
  const int A = static_cast<int>(next[0].size());
  std::vector<double> best(S, -1.0);
  std::vector<int> policy(S, 0);
  for (;;) {
    for (int start = 0; start < S; ++start) {
      std::vector<int> seen(S, -1);
      std::vector<int> path;
      int s = start;
      while (seen[s] < 0) {
        seen[s] = static_cast<int>(path.size());
        path.push_back(s);
        s = next[s][policy[s]];
      }
      double total = 0.0;
      for (std::size_t i = seen[s]; i < path.size(); ++i) total += r[path[i]][policy[path[i]]];
      best[start] = std::max(best[start], total / static_cast<double>(path.size() - seen[s]));
    }
    int s = 0;
    while (s < S && ++policy[s] == A) policy[s++] = 0;
    if (s == S) break;
  }
  return best;
}

}  // namespace

TEST_CASE("tabular MDP validation") {
  CHECK_THROWS_AS(make_mdp({{{0.5, 0.4}}, {{1.0, 0.0}}}, {{0.0}, {0.0}}), DomainError);
  CHECK_THROWS_AS(make_mdp({{{1.2, -0.2}}, {{1.0, 0.0}}}, {{0.0}, {0.0}}), DomainError);
  CHECK_THROWS_AS(make_mdp({{{1.0, 0.0}}, {{1.0, 0.0}}}, {{1.5}, {0.0}}), DomainError);
  CHECK_THROWS_AS(make_mdp({{{1.0, 0.0}}, {{1.0, 0.0}}}, {{0.5}}), DomainError);
  const auto m = three_state();
  CHECK(m.num_states() == 3);
  CHECK(m.num_actions() == 2);
  CHECK(m.probability(2, 1, 1) == 0.9);
  CHECK(m.r_max() == 1.0);
  CHECK_FALSE(m.is_deterministic());
  CHECK(deterministic({{1}, {0}}, {{1.0}, {0.0}}).is_deterministic());
}

TEST_CASE("flatten and unflatten are inverse with row-major pair order") {
  QTable q(2, 3);
  q << 1, 2, 3, 4, 5, 6;
  const Vector v = flatten(q);
  CHECK(v(4) == q(1, 1));
  CHECK(unflatten(v, 2, 3) == q);
  CHECK_THROWS_AS(unflatten(v, 3, 3), DomainError);
}

TEST_CASE("anchor functions are shift equivariant") {
  QTable q(2, 2);
  q << 1, -2, 0.5, 4;
  CHECK(AnchorFunction::max()(q) == 4.0);
  CHECK(AnchorFunction::min()(q) == -2.0);
  CHECK(AnchorFunction::mean()(q) == doctest::Approx(0.875));
  CHECK(AnchorFunction::coordinate(1, 0)(q) == 0.5);
  CHECK_THROWS_AS(AnchorFunction::coordinate(2, 0)(q), DomainError);
  for (const auto& f : {AnchorFunction::max(), AnchorFunction::min(), AnchorFunction::mean(),
                        AnchorFunction::coordinate(0, 1)}) {
    const QTable shifted = (q.array() + 3.25).matrix();
    CHECK(f(shifted) == doctest::Approx(f(q) + 3.25));
  }
}

TEST_CASE("discounted Bellman map is a sup-norm contraction") {
  const auto m = three_state();
  std::srand(3);
  for (int i = 0; i < 200; ++i) {
    const QTable a = QTable::Random(3, 2) * 5.0, b = QTable::Random(3, 2) * 5.0;
    const double lhs = (bellman_discounted(m, a, 0.9) - bellman_discounted(m, b, 0.9)).cwiseAbs().maxCoeff();
    CHECK(lhs <= 0.9 * (a - b).cwiseAbs().maxCoeff() + 1e-14);
  }
}

TEST_CASE("average Bellman map is nonexpansive and commutes with shifts") {
  const auto m = three_state();
  std::srand(4);
  for (int i = 0; i < 200; ++i) {
    const QTable a = QTable::Random(3, 2) * 5.0, b = QTable::Random(3, 2) * 5.0;
    const double lhs = (bellman_average(m, a, 0.3) - bellman_average(m, b, 0.3)).cwiseAbs().maxCoeff();
    CHECK(lhs <= (a - b).cwiseAbs().maxCoeff() + 1e-14);
    const QTable shifted = (a.array() + 5.0).matrix();
    const QTable diff = bellman_average(m, shifted, 0.3) - bellman_average(m, a, 0.3);
    CHECK(diff.minCoeff() == doctest::Approx(5.0));
    CHECK(diff.maxCoeff() == doctest::Approx(5.0));
  }
}

TEST_CASE("discounted solver agrees with policy evaluation of its greedy policy") {
  const auto m = three_state();
  const double gamma = 0.9, tol = 1e-10;
  const auto sol = solve_discounted_exact(m, gamma, tol);
  CHECK(sol.within_norm_bound);
  CHECK((bellman_discounted(m, sol.q_star, gamma) - sol.q_star).cwiseAbs().maxCoeff() <= 2 * tol);

  const auto pi = greedy_policy(sol.q_star);
  Matrix p_pi(3, 3);
  Vector r_pi(3);
  for (int s = 0; s < 3; ++s) {
    for (int j = 0; j < 3; ++j) p_pi(s, j) = m.probability(s, pi[s], j);
    r_pi(s) = m.rewards()(s, pi[s]);
  }
  const Vector v = (Matrix::Identity(3, 3) - gamma * p_pi).lu().solve(r_pi);
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      double q = m.rewards()(s, a);
      for (int j = 0; j < 3; ++j) q += gamma * m.probability(s, a, j) * v(j);
      CHECK(sol.q_star(s, a) == doctest::Approx(q).epsilon(1e-9));
    }
  }
}

TEST_CASE("average solver on small chains") {
  SUBCASE("periodic two-cycle") {
    const auto sol = solve_average_exact(deterministic({{1}, {0}}, {{1.0}, {0.0}}), 1e-12);
    CHECK(sol.v_star == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(sol.q_star.maxCoeff() == 0.0);
  }
  SUBCASE("transient state into an absorbing one") {
    const auto sol = solve_average_exact(deterministic({{1}, {1}}, {{0.0}, {0.3}}), 1e-12);
    CHECK(sol.v_star == doctest::Approx(0.3).epsilon(1e-10));
  }
  SUBCASE("stochastic three-state example") {
    const auto m = three_state();
    const auto sol = solve_average_exact(m, 1e-10);
    CHECK((bellman_average(m, sol.q_star, sol.v_star) - sol.q_star).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("average gain matches cycle enumeration on deterministic MDPs") {
  RngStream rng(12, 0);
  for (int trial = 0; trial < 60; ++trial) {
    const int S = 2 + trial % 5;
    const int A = 1 + trial % 3;
    std::vector<std::vector<int>> next(S, std::vector<int>(A));
    std::vector<std::vector<double>> r(S, std::vector<double>(A));
    for (int s = 0; s < S; ++s) {
      // action 0 walks a ring so every state communicates
      next[s][0] = (s + 1) % S;
      for (int a = 1; a < A; ++a) next[s][a] = static_cast<int>(rng.uniform() * S);
      for (int a = 0; a < A; ++a) r[s][a] = std::round(rng.uniform() * 100.0) / 100.0;
    }
    const auto gains = cycle_enumeration_gain(next, r);
    for (double g : gains) REQUIRE(g == doctest::Approx(gains[0]).epsilon(1e-12));
    const auto sol = solve_average_exact(deterministic(next, r), 1e-11);
    INFO("trial " << trial);
    CHECK(sol.v_star == doctest::Approx(gains[0]).epsilon(1e-9));
  }
}

TEST_CASE("unichain check") {
  CHECK(check_unichain(deterministic({{1}, {0}}, {{1.0}, {0.0}})));
  CHECK(check_unichain(deterministic({{1}, {1}}, {{0.0}, {0.3}})));
  CHECK_FALSE(check_unichain(deterministic({{0}, {1}}, {{0.0}, {0.0}})));
  // Only the policy that stays put in both states splits the chain.
  CHECK_FALSE(check_unichain(deterministic({{0, 1}, {1, 0}}, {{0.0, 0.0}, {0.0, 0.0}})));
  CHECK(check_unichain(three_state()));
}

TEST_CASE("generative sampling frequencies") {
  const auto m = three_state();
  RngStream rng(5, 0);
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[generative_sample(m, 0, 0, rng)];
  const double p[3] = {0.6, 0.3, 0.1};
  for (int j = 0; j < 3; ++j) CHECK(std::abs(counts[j] / double(n) - p[j]) < 4.0 * std::sqrt(p[j] * (1 - p[j]) / n));
  CHECK_THROWS_AS(generative_sample(m, 3, 0, rng), DomainError);
}

TEST_CASE("sampled next values are exact on point masses and unbiased otherwise") {
  const auto det = deterministic({{1, 0}, {0, 1}}, {{0.0, 0.0}, {0.0, 0.0}});
  QTable q(2, 2);
  q << 1.5, -1, 0.25, 3;
  RngStream rng(6, 0);
  for (std::uint64_t k : {1u, 7u, 5000u}) {
    const QTable v = sampled_next_values(det, q, k, rng);
    CHECK(v(0, 0) == 3.0);
    CHECK(v(0, 1) == 1.5);
    CHECK(v(1, 1) == 3.0);
  }

  const auto m = three_state();
  QTable q3(3, 2);
  q3 << 1, 0, -2, 0.5, 3, 3;
  const QTable exact = bellman_discounted(m, q3, 0.5);
  const QTable mean_next = ((exact - m.rewards()) / 0.5).eval();
  for (std::uint64_t k : {3u, 4000u}) {
    QTable sum = QTable::Zero(3, 2);
    const int reps = 4000;
    for (int i = 0; i < reps; ++i) sum += sampled_next_values(m, q3, k, rng);
    // Values lie in [-2, 3], so the batch mean has sd at most 2.5 / sqrt(k).
    const double se = 2.5 / std::sqrt(static_cast<double>(k) * reps);
    CHECK((sum / reps - mean_next).cwiseAbs().maxCoeff() < 4.0 * se);
  }
}

TEST_CASE("sampled next values replay under identical streams regardless of Q") {
  // Indicator tables pick out the empirical frequency of one next state each;
  // under shared draws the three frequencies add up to 1.
  const auto m = three_state();
  QTable total = QTable::Zero(3, 2);
  for (int target = 0; target < 3; ++target) {
    QTable q = QTable::Zero(3, 2);
    q(target, 0) = 1.0;
    RngStream r(7, 0);
    total += sampled_next_values(m, q, 9, r);
  }
  CHECK((total.array() - 1.0).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("single self-loop: geometric series and the two-action fixed point") {
  const auto loop = make_mdp({{{1.0}}}, {{1.0}});
  CHECK(bellman_discounted(loop, QTable::Zero(1, 1), 0.5)(0, 0) == 1.0);
  CHECK(solve_discounted_exact(loop, 0.5, 1e-12).q_star(0, 0) == doctest::Approx(2.0).epsilon(1e-11));

  const auto two = make_mdp({{{1.0}, {1.0}}}, {{0.3, 0.7}});
  QTable q(1, 2);
  q << 2.6, 3.0;
  CHECK((bellman_average(two, q, 0.7) - q).cwiseAbs().maxCoeff() <= 1e-15);
}
