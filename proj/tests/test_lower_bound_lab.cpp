#include <doctest.h>

#include <cmath>

#include "halpern/lower_bound_lab.hpp"

using namespace halpern;

TEST_CASE("instance parameters") {
  const auto a = build_instance(0.1, 2.0, 1.0);
  CHECK(a.lambda == doctest::Approx(0.2));
  CHECK(a.d == 10);
  CHECK(a.p == doctest::Approx(0.04));
  CHECK(a.n_budget == 124);
  const auto b = build_instance(0.25, 1.0, 1.0);
  CHECK(b.d == 2);
  CHECK(b.p == doctest::Approx(0.25));
  CHECK(b.n_budget == 3);
  CHECK_THROWS_AS(build_instance(0.5, 2.0, 1.0), DomainError);
  CHECK_THROWS_AS(build_instance(0.1, 0.1, 1.0), DomainError);
  CHECK_THROWS_AS(build_instance(0.0, 2.0, 1.0), DomainError);
}

TEST_CASE("prog and phi") {
  Vector x(4);
  x << 0.1, 0.0, 0.05, 0.0;
  CHECK(prog(x) == 3);
  CHECK(prog(Vector::Zero(4)) == 0);
  const double lambda = 0.2;
  // |0.2 - 0.1| + |0.1 - 0| + |0 - 0.05| + 0.05
  CHECK(phi(x, 3, lambda) == doctest::Approx(0.3));
  CHECK_THROWS_AS(phi(x, 0, lambda), DomainError);
  CHECK_THROWS_AS(phi(x, 5, lambda), DomainError);
}

TEST_CASE("phi matches the exact residual below full progress") {
  const double lambda = 0.2;
  const int d = 6;
  const auto op = make_shift_projection(lambda, d);
  RngStream rng(1, 0);
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * (d - 1));
    Vector x = Vector::Zero(d);
    for (int i = 0; i < n; ++i) x(i) = (rng.uniform() * 1.6 - 0.3) * lambda;
    if (x(n - 1) == 0.0) x(n - 1) = 0.01;
    const double r = norm(x - apply(op, x), NormKind::l1());
    REQUIRE(phi(x, n, lambda) == doctest::Approx(r).epsilon(1e-12));
    REQUIRE(r >= lambda - 1e-12);
  }
}

TEST_CASE("the first step from zero has residual lambda") {
  const auto inst = build_instance(0.1, 2.0, 1.0);
  RngStream rng(2, 0);
  const auto trace = run_adversarial(inst, SpanAlgorithm::km_constant(0.5), rng);
  CHECK(trace.rows[0].residual == doctest::Approx(inst.lambda));
  CHECK(trace.rows[0].prog == 0);
}

TEST_CASE("adversarial runs stop at the first infeasible step") {
  const auto inst = build_instance(0.1, 2.0, 1.0);
  RngStream rng(3, 0);
  const auto km = run_adversarial(inst, SpanAlgorithm::km_constant(0.5), rng);
  REQUIRE(km.rows.size() == 126);
  CHECK(km.rows[124].within_budget);
  CHECK(km.rows[124].cum_queries == 124);
  CHECK_FALSE(km.rows[125].within_budget);

  const auto halpern = run_adversarial(inst, SpanAlgorithm::halpern_classic(BatchSchedule::power(4)), rng);
  // 1 + 16 + 81 = 98 <= 124 < 98 + 256.
  REQUIRE(halpern.rows.size() == 5);
  CHECK(halpern.rows[3].within_budget);
  CHECK_FALSE(halpern.rows[4].within_budget);
}

TEST_CASE("progress advances by at most one, with probability p per query") {
  const auto inst = build_instance(0.1, 2.0, 1.0);
  std::uint64_t trials = 0, increments = 0;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) {
    RngStream rng(seed, 0);
    const auto t = run_adversarial(inst, SpanAlgorithm::km_constant(0.5), rng);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
      const int before = t.rows[i - 1].prog, after = t.rows[i].prog;
      REQUIRE(after >= before);
      REQUIRE(after <= before + 1);
      if (before < inst.d) {
        ++trials;
        increments += after - before;
      }
    }
  }
  const double mean = inst.p * trials;
  const double sd = std::sqrt(trials * inst.p * (1 - inst.p));
  CHECK(std::abs(increments - mean) < 4.0 * sd);
}

TEST_CASE("custom span rule") {
  const auto inst = build_instance(0.25, 1.0, 1.0);
  const auto algo = SpanAlgorithm::custom([](int) { return AffineStep{0.0, 0.0, 1.0, 1.0}; },
                                          BatchSchedule::constant(1), "picard");
  CHECK(algo.name() == "picard");
  RngStream rng(4, 0);
  const auto t = run_adversarial(inst, algo, rng);
  for (const auto& row : t.rows) {
    if (row.within_budget && row.prog < inst.d) CHECK(row.residual >= inst.lambda - 1e-12);
  }
}
