#include <doctest.h>

#include <cmath>

#include "halpern/mdp_model.hpp"
#include "halpern/oracle.hpp"

using namespace halpern;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MdpHandle small_mdp() {
  return std::make_shared<const TabularMDP>(make_mdp(
      {{{0.5, 0.5}, {0.1, 0.9}}, {{0.7, 0.3}, {1.0, 0.0}}}, {{0.2, 1.0}, {0.0, 0.6}}));
}

}  // namespace

TEST_CASE("noiseless oracle returns the operator exactly") {
  const OracleDescriptor o(make_rotation(0.7), NoNoise{});
  RngStream rng(1, 0);
  const Vector x = vec({0.3, -2.0});
  CHECK(query(o, x, rng) == apply(o.base(), x));
  CHECK(minibatch(o, x, 7, rng) == apply(o.base(), x));
  const auto m = empirical_moments(o, x, 10, rng);
  CHECK(m.mean.isApprox(apply(o.base(), x)));
  CHECK(m.second_moment == 0.0);
}

TEST_CASE("oracle construction validates the pairing") {
  CHECK_THROWS_AS(OracleDescriptor(make_rotation(0.1), ResistantBernoulli{0.5}), DomainError);
  CHECK_THROWS_AS(OracleDescriptor(make_shift_projection(1.0, 3), ResistantBernoulli{1.0}), DomainError);
  CHECK_THROWS_AS(OracleDescriptor(make_shift_projection(1.0, 3), ResistantBernoulli{0.0}), DomainError);
  CHECK_THROWS_AS(OracleDescriptor(make_rotation(0.1), MdpGenerative{}), DomainError);
  CHECK_THROWS_AS(OracleDescriptor(make_rotation(0.1), GaussianNoise{-1.0}), DomainError);
  CHECK_NOTHROW(OracleDescriptor(make_bellman_discounted(small_mdp(), 0.9), MdpGenerative{}));
}

TEST_CASE("minibatch rejects an empty batch and wrong dimensions") {
  const OracleDescriptor o(make_rotation(0.1), GaussianNoise{1.0});
  RngStream rng(2, 0);
  CHECK_THROWS_AS(minibatch(o, vec({1, 2}), 0, rng), DomainError);
  CHECK_THROWS_AS(query(o, vec({1, 2, 3}), rng), DomainError);
  CHECK_THROWS_AS(empirical_moments(o, vec({1, 2}), 1, rng), DomainError);
}

TEST_CASE("progress of a vector") {
  CHECK(progress(Vector::Zero(4)) == 0);
  CHECK(progress(vec({1, 0, 0, 0})) == 1);
  CHECK(progress(vec({0, 0, -3, 0})) == 3);
  CHECK(progress(vec({1, 1, 1, 1})) == 4);
}

TEST_CASE("resistant oracle reveals the next coordinate scaled by 1/p or hides it") {
  const double p = 0.04;
  const OracleDescriptor o(make_shift_projection(0.2, 5), ResistantBernoulli{p});
  const Vector x = vec({0.1, 0.05, 0, 0, 0});
  const Vector tx = apply(o.base(), x);
  RngStream rng(3, 0);
  int revealed = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vector q = query(o, x, rng);
    REQUIRE(q.head(2) == tx.head(2));
    REQUIRE(q.tail(2) == tx.tail(2));
    if (q(2) != 0.0) {
      ++revealed;
      REQUIRE(q(2) == doctest::Approx(tx(2) / p).epsilon(1e-15));
      CHECK(q(2) / tx(2) == doctest::Approx(25.0));
    }
  }
  // 2000 trials at p = 0.04: mean 80, sd about 8.8.
  CHECK(revealed > 40);
  CHECK(revealed < 120);
}

TEST_CASE("resistant oracle at full progress is exact") {
  const OracleDescriptor o(make_shift_projection(0.2, 3), ResistantBernoulli{0.3});
  RngStream rng(4, 0);
  const Vector x = vec({0.1, 0.1, 0.1});
  CHECK(query(o, x, rng) == apply(o.base(), x));
}

TEST_CASE("gaussian minibatch of 10000 has variance 1e-4 per coordinate") {
  const OracleDescriptor o(make_identity(3), GaussianNoise{1.0});
  RngStream rng(5, 0);
  const Vector x = vec({1, 2, 3});
  const int reps = 1000;
  Vector sum = Vector::Zero(3), sum_sq = Vector::Zero(3);
  for (int i = 0; i < reps; ++i) {
    const Vector err = minibatch(o, x, 10000, rng) - x;
    sum += err;
    sum_sq += err.cwiseProduct(err);
  }
  for (int c = 0; c < 3; ++c) {
    const double var = (sum_sq(c) - sum(c) * sum(c) / reps) / (reps - 1);
    CHECK(var >= 7e-5);
    CHECK(var <= 1.3e-4);
  }
}

TEST_CASE("explicit and aggregated gaussian batches agree in distribution") {
  // Either side of the explicit limit the estimator variance is e^2 / k.
  const OracleDescriptor o(make_identity(1), GaussianNoise{2.0});
  for (std::uint64_t k : {kExplicitBatchLimit, kExplicitBatchLimit + 1}) {
    RngStream rng(6, k);
    double s2 = 0.0;
    const int reps = 4000;
    for (int i = 0; i < reps; ++i) {
      const double e = minibatch(o, Vector::Zero(1), k, rng)(0);
      s2 += e * e;
    }
    const double expected = 4.0 / static_cast<double>(k);
    CHECK(std::abs(s2 / reps / expected - 1.0) < 4.0 * std::sqrt(2.0 / reps));
  }
}

TEST_CASE("gaussian second moment is the sum of coordinate variances") {
  const OracleDescriptor o(make_identity(5), GaussianNoise{1.0});
  RngStream rng(7, 0);
  const auto m = empirical_moments(o, Vector::Ones(5), 100000, rng);
  CHECK(m.second_moment == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("resistant second moment stays below sigma squared") {
  const double lambda = 0.2, sigma = 1.0;
  const double p = lambda * lambda / (sigma * sigma);
  const OracleDescriptor o(make_shift_projection(lambda, 10), ResistantBernoulli{p});
  RngStream rng(8, 0);
  const Vector x = vec({0.2, 0.2, 0.2, 0, 0, 0, 0, 0, 0, 0});
  const Vector tx = apply(o.base(), x);
  const int m = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const double e = (query(o, x, rng) - tx).squaredNorm();
    s1 += e;
    s2 += e * e;
  }
  const double mean = s1 / m;
  const double se = std::sqrt((s2 / m - mean * mean) / m);
  CHECK(mean <= sigma * sigma + 3.0 * se);
  // Exact value lambda^2 (1 - p) / p.
  CHECK(std::abs(mean - lambda * lambda * (1 - p) / p) <= 4.0 * se);
}

TEST_CASE("minibatch estimators are unbiased") {
  const Vector x = vec({0.15, 0.07, 0.0, 0.0});
  const OracleDescriptor resistant(make_shift_projection(0.2, 4), ResistantBernoulli{0.3});
  const OracleDescriptor generative(make_bellman_average(small_mdp(), 0.4), MdpGenerative{});
  const Vector q = vec({1.0, -0.5, 0.25, 2.0});
  struct Case {
    const OracleDescriptor* o;
    Vector x;
    std::uint64_t k;
  };
  for (const Case& c : {Case{&resistant, x, 3}, Case{&resistant, x, 5000}, Case{&generative, q, 2},
                        Case{&generative, q, 3000}}) {
    RngStream rng(9, c.k);
    const Vector exact = apply(c.o->base(), c.x);
    const int reps = 20000;
    Vector s1 = Vector::Zero(exact.size()), s2 = Vector::Zero(exact.size());
    for (int i = 0; i < reps; ++i) {
      const Vector e = minibatch(*c.o, c.x, c.k, rng) - exact;
      s1 += e;
      s2 += e.cwiseProduct(e);
    }
    for (Eigen::Index j = 0; j < exact.size(); ++j) {
      const double mean = s1(j) / reps;
      const double se = std::sqrt(std::max(0.0, s2(j) / reps - mean * mean) / reps);
      INFO("k = " << c.k << ", coordinate " << j);
      CHECK(std::abs(mean) <= 4.0 * se + 1e-12);
    }
  }
}

TEST_CASE("identical streams give bit-identical oracle output") {
  const OracleDescriptor o(make_rotation(0.4), GaussianNoise{0.5});
  RngStream a(10, 1), b(10, 1);
  for (std::uint64_t k : {1u, 10u, 5000u}) CHECK(minibatch(o, vec({1, 1}), k, a) == minibatch(o, vec({1, 1}), k, b));
}
