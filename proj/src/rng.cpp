#include "halpern/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "halpern/core_linalg.hpp"

namespace halpern {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

// Stirling series tail log(k!) - [(k+1/2)log(k+1) - (k+1) + log(sqrt(2 pi))].
double stirling_correction(double k) {
  static constexpr double kTable[10] = {
      0.08106146679532726, 0.04134069595540929, 0.02767792568499834, 0.02079067210376509,
      0.01664469118982119, 0.01387612882307075, 0.01189670994589177, 0.01041126526197209,
      0.009255462182712733, 0.008330563433362871};
  if (k <= 9.0) return kTable[static_cast<int>(k)];
  const double r = 1.0 / (k + 1.0);
  const double r2 = r * r;
  return (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / 1260.0 * r2) * r2) * r;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

RngStream RngStream::substream(std::uint64_t child) const {
  return RngStream(seed_, splitmix64(stream_ ^ splitmix64(child + 0x632be59bd9b4e019ull)));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t block = position_ >> 1;
  if (block != block_index_) {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = philox4x32_10(ctr, key);
    block_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    block_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    block_index_ = block;
  }
  return block_[position_++ & 1];
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * kTwoPow53Inv; }

double RngStream::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * kTwoPow53Inv;
}

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

bool RngStream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli: p must lie in [0, 1]");
  return uniform() < p;
}

std::uint64_t RngStream::binomial(std::uint64_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial: p must lie in [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - binomial(n, 1.0 - p);
  if (static_cast<double>(n) * p < 10.0) return binomial_inversion(n, p);
  return binomial_btrd(n, p);
}

std::uint64_t RngStream::binomial_inversion(std::uint64_t n, double p) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double a = (static_cast<double>(n) + 1.0) * s;
  const double r0 = std::exp(static_cast<double>(n) * std::log1p(-p));
  for (;;) {
    double r = r0;
    double u = uniform();
    std::uint64_t x = 0;
    while (u >= r) {
      u -= r;
      ++x;
      if (x > n) break;  // round-off exhausted the mass; redraw
      r *= a / static_cast<double>(x) - s;
    }
    if (x <= n) return x;
  }
}

// W. Hormann, "The generation of binomial random variates", J. Statist.
// Comput. Simul. 46 (1993). Requires p <= 1/2 and n p >= 10.
std::uint64_t RngStream::binomial_btrd(std::uint64_t n_int, double p) {
  const double n = static_cast<double>(n_int);
  const double q = 1.0 - p;
  const double m = std::floor((n + 1.0) * p);
  const double r = p / q;
  const double nr = (n + 1.0) * r;
  const double npq = n * p * q;
  const double sqrt_npq = std::sqrt(npq);
  const double b = 1.15 + 2.53 * sqrt_npq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = n * p + 0.5;
  const double alpha = (2.83 + 5.1 / b) * sqrt_npq;
  const double v_r = 0.92 - 4.2 / b;
  const double u_rv_r = 0.86 * v_r;

  for (;;) {
    double v = uniform();
    double u;
    if (v <= u_rv_r) {
      u = v / v_r - 0.43;
      return static_cast<std::uint64_t>(std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + c));
    }
    if (v >= v_r) {
      u = uniform() - 0.5;
    } else {
      u = v / v_r - 0.93;
      u = (u < 0.0 ? -0.5 : 0.5) - u;
      v = uniform() * v_r;
    }

    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + c);
    if (k < 0.0 || k > n) continue;
    v = v * alpha / (a / (us * us) + b);
    const double km = std::abs(k - m);

    if (km <= 15.0) {
      // recursive evaluation of f(k) / f(m)
      double f = 1.0;
      if (m < k) {
        for (double i = m + 1.0; i <= k; i += 1.0) f *= nr / i - r;
      } else if (m > k) {
        for (double i = k + 1.0; i <= m; i += 1.0) v *= nr / i - r;
      }
      if (v <= f) return static_cast<std::uint64_t>(k);
      continue;
    }

    // squeeze on the log scale
    v = std::log(v);
    const double rho = (km / npq) * (((km / 3.0 + 0.625) * km + 1.0 / 6.0) / npq + 0.5);
    const double t = -km * km / (2.0 * npq);
    if (v < t - rho) return static_cast<std::uint64_t>(k);
    if (v > t + rho) continue;

    const double nm = n - m + 1.0;
    const double h = (m + 0.5) * std::log((m + 1.0) / (r * nm)) + stirling_correction(m) +
                     stirling_correction(n - m);
    const double nk = n - k + 1.0;
    // log(nm / nk) through log1p: the ratio is within O(1/sqrt n) of one
    const double bound = h + (n + 1.0) * std::log1p((k - m) / nk) +
                         (k + 0.5) * std::log(nk * r / (k + 1.0)) - stirling_correction(k) -
                         stirling_correction(n - k);
    if (v <= bound) return static_cast<std::uint64_t>(k);
  }
}

std::size_t RngStream::categorical(std::span<const double> probs) {
  if (probs.empty()) throw DomainError("categorical: empty probability row");
  const double u = uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > 0.0) last_positive = j;
    cumulative += probs[j];
    if (u < cumulative) return j;
  }
  return last_positive;
}

std::vector<std::uint64_t> RngStream::multinomial(std::uint64_t n, std::span<const double> probs) {
  std::vector<std::uint64_t> counts(probs.size(), 0);
  double remaining_mass = 1.0;
  std::uint64_t remaining = n;
  for (std::size_t j = 0; j < probs.size() && remaining > 0; ++j) {
    if (j + 1 == probs.size() || remaining_mass <= probs[j]) {
      counts[j] = remaining;
      remaining = 0;
      break;
    }
    const double share = std::clamp(probs[j] / remaining_mass, 0.0, 1.0);
    counts[j] = binomial(remaining, share);
    remaining -= counts[j];
    remaining_mass -= probs[j];
  }
  return counts;
}

}  // namespace halpern
