#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "halpern/rng.hpp"

using namespace halpern;

namespace {

// log of the Binomial(n, p) pmf at k, computed independently of the sampler.
double log_binomial_pmf(std::uint64_t n, double p, std::uint64_t k) {
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  return std::lgamma(nd + 1) - std::lgamma(kd + 1) - std::lgamma(nd - kd + 1) + kd * std::log(p) +
         (nd - kd) * std::log1p(-p);
}

// Pearson statistic of `draws` against Binomial(n, p), pooling tails so that
// every cell expects at least 5 counts. Returns (statistic, degrees of freedom).
std::pair<double, int> binomial_chi_square(const std::vector<std::uint64_t>& draws, std::uint64_t n, double p) {
  std::vector<double> observed(n + 1, 0.0);
  for (auto d : draws) observed[d] += 1.0;
  const double total = static_cast<double>(draws.size());
  double stat = 0.0;
  int cells = 0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::uint64_t k = 0; k <= n; ++k) {
    pooled_obs += observed[k];
    pooled_exp += total * std::exp(log_binomial_pmf(n, p, k));
    if (pooled_exp >= 5.0 && k < n) {
      stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
      ++cells;
      pooled_obs = pooled_exp = 0.0;
    }
  }
  if (pooled_exp > 0.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  return {stat, cells - 1};
}

// Upper 0.001 quantile of chi-square via the Wilson-Hilferty approximation.
double chi_square_critical(int dof) {
  const double z = 3.0902;
  const double k = dof;
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(philox4x32_10(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("identical seed and stream replay bit for bit") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
    REQUIRE(a.normal() == b.normal());
    REQUIRE(a.binomial(1000, 0.3) == b.binomial(1000, 0.3));
  }
}

TEST_CASE("copies fork identical replays, substreams differ") {
  RngStream a(1, 0);
  a.next_u64();
  RngStream copy = a;
  CHECK(copy.next_u64() == a.next_u64());
  RngStream s1 = a.substream(1), s2 = a.substream(2), s1b = a.substream(1);
  const auto x1 = s1.next_u64();
  CHECK(x1 == s1b.next_u64());
  CHECK(x1 != s2.next_u64());
  CHECK(RngStream(1, 0).next_u64() != RngStream(2, 0).next_u64());
}

TEST_CASE("uniform draws lie in [0, 1) with the right mean") {
  RngStream r(3, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal draws have unit variance and zero mean") {
  RngStream r(11, 3);
  const int n = 400000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("binomial sampler matches the exact pmf") {
  // Covers the inversion branch (np < 10), the BTRD branch and p > 1/2.
  struct Case {
    std::uint64_t n;
    double p;
  };
  for (const Case c : {Case{20, 0.1}, Case{50, 0.15}, Case{200, 0.3}, Case{5000, 0.02}, Case{1000, 0.85},
                       Case{100000, 0.5}}) {
    RngStream r(2024, c.n);
    std::vector<std::uint64_t> draws(40000);
    for (auto& d : draws) d = r.binomial(c.n, c.p);
    const auto [stat, dof] = binomial_chi_square(draws, c.n, c.p);
    INFO("n = " << c.n << ", p = " << c.p << ", chi2 = " << stat << ", dof = " << dof);
    CHECK(stat < chi_square_critical(dof));
  }
}

TEST_CASE("binomial edge cases") {
  RngStream r(5, 5);
  CHECK(r.binomial(0, 0.3) == 0);
  CHECK(r.binomial(17, 0.0) == 0);
  CHECK(r.binomial(17, 1.0) == 17);
  for (int i = 0; i < 1000; ++i) REQUIRE(r.binomial(3'000'000'000ULL, 0.999) <= 3'000'000'000ULL);
}

TEST_CASE("categorical follows inverse-CDF order and frequencies") {
  RngStream r(9, 9);
  const std::vector<double> point{0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) REQUIRE(r.categorical(point) == 1);
  const std::vector<double> uniform(4, 0.25);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[r.categorical(uniform)];
  for (int c : counts) {
    CHECK(c / static_cast<double>(n) >= 0.24);
    CHECK(c / static_cast<double>(n) <= 0.26);
  }
}

TEST_CASE("multinomial counts sum to n and have the right means") {
  RngStream r(77, 1);
  const std::vector<double> p{0.2, 0.5, 0.3};
  const std::uint64_t n = 1'000'000;
  std::vector<double> mean(3, 0.0);
  const int reps = 2000;
  for (int i = 0; i < reps; ++i) {
    const auto c = r.multinomial(n, p);
    REQUIRE(std::accumulate(c.begin(), c.end(), std::uint64_t{0}) == n);
    for (int j = 0; j < 3; ++j) mean[j] += static_cast<double>(c[j]) / reps;
  }
  for (int j = 0; j < 3; ++j) {
    const double sd = std::sqrt(n * p[j] * (1 - p[j]) / reps);
    CHECK(std::abs(mean[j] - n * p[j]) < 4.0 * sd);
  }
}
