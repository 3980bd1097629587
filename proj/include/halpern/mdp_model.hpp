#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "halpern/core_linalg.hpp"
#include "halpern/rng.hpp"

namespace halpern {

/// Dense row-major matrix; a Q-table q(s, a) flattens to index s * A + a.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using QTable = RowMatrix;

/// Finite MDP with rewards in [0, 1].
///
/// Transitions are stored as an (S*A) x S row-stochastic matrix whose row
/// s * A + a is p(. | s, a), so the expected next-state value of every pair is
/// one matrix-vector product.
class TabularMDP {
 public:
  /// Validates shapes, row sums (1e-12), nonnegativity, finiteness and the
  /// reward range. Throws DomainError naming the offending entry.
  TabularMDP(RowMatrix transitions, QTable rewards);

  int num_states() const { return static_cast<int>(rewards_.rows()); }
  int num_actions() const { return static_cast<int>(rewards_.cols()); }
  int num_pairs() const { return num_states() * num_actions(); }

  const RowMatrix& transitions() const { return transitions_; }
  const QTable& rewards() const { return rewards_; }
  double probability(int s, int a, int next) const { return transitions_(pair_index(s, a), next); }
  std::span<const double> row(int s, int a) const {
    return {transitions_.row(pair_index(s, a)).data(), static_cast<std::size_t>(num_states())};
  }
  double r_max() const { return rewards_.maxCoeff(); }
  double r_min() const { return rewards_.minCoeff(); }
  int pair_index(int s, int a) const { return s * num_actions() + a; }

  /// True when every transition row is a point mass.
  bool is_deterministic() const;

 private:
  RowMatrix transitions_;
  QTable rewards_;
};

using MdpHandle = std::shared_ptr<const TabularMDP>;

/// Builds an MDP from nested [s][a][s'] probabilities and [s][a] rewards.
TabularMDP make_mdp(const std::vector<std::vector<std::vector<double>>>& transitions,
                    const std::vector<std::vector<double>>& rewards);

/// Flattened view of a table as a vector (row-major) and back.
Vector flatten(const QTable& q);
QTable unflatten(const Vector& v, int num_states, int num_actions);

void check_shape(const TabularMDP& m, const QTable& q, const char* what);

/// max_a Q(s, a) for each state; ties go to the lowest action index.
Vector greedy_values(const QTable& q);
std::vector<int> greedy_policy(const QTable& q);

/// (TQ)(s,a) = sum_s' p(s'|s,a) (r(s,a) + gamma max_a' Q(s',a')).
QTable bellman_discounted(const TabularMDP& m, const QTable& q, double gamma);
/// (HQ)(s,a) = sum_s' p(s'|s,a) (r(s,a) + max_a' Q(s',a')) - v_star.
QTable bellman_average(const TabularMDP& m, const QTable& q, double v_star);

/// Shift-equivariant anchor functional: f(Q + c e) = f(Q) + c.
class AnchorFunction {
 public:
  enum class Kind { Max, Min, Mean, Coordinate };

  static AnchorFunction max() { return AnchorFunction(Kind::Max, 0, 0); }
  static AnchorFunction min() { return AnchorFunction(Kind::Min, 0, 0); }
  static AnchorFunction mean() { return AnchorFunction(Kind::Mean, 0, 0); }
  static AnchorFunction coordinate(int s, int a) { return AnchorFunction(Kind::Coordinate, s, a); }

  Kind kind() const { return kind_; }
  int state() const { return state_; }
  int action() const { return action_; }
  double operator()(const QTable& q) const;
  std::string name() const;

 private:
  AnchorFunction(Kind kind, int s, int a) : kind_(kind), state_(s), action_(a) {}
  Kind kind_;
  int state_;
  int action_;
};

struct DiscountedSolution {
  QTable q_star;
  int iterations = 0;
  /// ||Q*||_inf <= r_max / (1 - gamma), up to the solver tolerance.
  bool within_norm_bound = false;
};

/// Value iteration until ||TQ - Q||_inf <= tol (1 - gamma) / (2 gamma), which
/// puts the returned table within tol of Q* in the sup norm.
DiscountedSolution solve_discounted_exact(const TabularMDP& m, double gamma, double tol);

struct AverageSolution {
  double v_star = 0.0;
  /// Solves HQ = Q, normalized so max Q = 0.
  QTable q_star;
  int iterations = 0;
};

/// Relative value iteration on Q-factors with Max normalization.
///
/// Each sweep averages the table with its Bellman image (weight 1/2); the
/// averaged map has the same fixed points modulo constants and gain, and it
/// does not oscillate on periodic chains. Stops once the span of
/// (LQ - Q) is <= tol, where LQ = r + P max Q; v* is the midpoint of that
/// difference. Throws std::runtime_error after max_iterations sweeps, which
/// usually means the unichain assumption fails.
AverageSolution solve_average_exact(const TabularMDP& m, double tol, int max_iterations = 1'000'000);

/// Largest instance check_unichain will enumerate (S * A^S).
inline constexpr double kUnichainEnumerationLimit = 1e6;

/// Every deterministic stationary policy induces a chain with one closed
/// communicating class. Throws DomainError when S * A^S exceeds the limit.
bool check_unichain(const TabularMDP& m);

/// One draw s' ~ p(. | s, a) by inverse CDF in state-index order.
int generative_sample(const TabularMDP& m, int s, int a, RngStream& rng);

/// Batches up to this size are drawn one transition at a time; larger ones
/// draw the multinomial count vector directly (identical distribution).
inline constexpr std::uint64_t kExplicitSampleLimit = 1024;

/// Table of (1/k) sum_i max_a' Q(s_i(s,a), a') with s_i ~ p(. | s, a).
///
/// Pairs are visited in row-major order with the batch innermost. The draws
/// depend only on (m, k, rng), never on Q, so two tables evaluated with
/// copies of one stream see identical samples.
QTable sampled_next_values(const TabularMDP& m, const QTable& q, std::uint64_t k, RngStream& rng);

}  // namespace halpern
