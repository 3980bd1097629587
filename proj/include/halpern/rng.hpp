#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace halpern {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive substream ids.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream.
///
/// Draw i of stream (seed, id) is a pure function of (seed, id, i): the seed
/// is the Philox key and (id, i) is the counter. All distributions below are
/// realized with fixed, platform-independent algorithms, so a stream replays
/// bit-for-bit anywhere the libm transcendental functions agree.
///
/// A stream is a value. Copying it forks an identical replay; substream()
/// derives an independent child keyed by an integer (iteration index,
/// state-action pair, ...). A single stream must be used sequentially.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const { return position_; }

  RngStream substream(std::uint64_t child) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Standard normal via the polar-free Box-Muller transform; both variates
  /// of a pair are used (the second is cached).
  double normal();
  bool bernoulli(double p);
  /// Exact Binomial(n, p) variate. Inversion when n*min(p,1-p) < 10,
  /// otherwise Hormann's BTRD rejection sampler.
  std::uint64_t binomial(std::uint64_t n, double p);
  /// Inverse-CDF draw from a probability row, categories in index order.
  std::size_t categorical(std::span<const double> probs);
  /// Counts of n categorical draws, via conditional binomials in index order.
  std::vector<std::uint64_t> multinomial(std::uint64_t n, std::span<const double> probs);

 private:
  std::uint64_t binomial_inversion(std::uint64_t n, double p);
  std::uint64_t binomial_btrd(std::uint64_t n, double p);

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  std::uint64_t block_index_ = ~std::uint64_t{0};
  std::array<std::uint64_t, 2> block_{};
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace halpern
