#include "halpern/mdp_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace halpern {

TabularMDP::TabularMDP(RowMatrix transitions, QTable rewards)
    : transitions_(std::move(transitions)), rewards_(std::move(rewards)) {
  const Eigen::Index S = rewards_.rows();
  const Eigen::Index A = rewards_.cols();
  if (S < 1 || A < 1) throw DomainError("TabularMDP: need at least one state and one action");
  if (transitions_.rows() != S * A || transitions_.cols() != S) {
    std::ostringstream msg;
    msg << "TabularMDP: transition matrix is " << transitions_.rows() << "x" << transitions_.cols()
        << ", expected " << S * A << "x" << S;
    throw DomainError(msg.str());
  }
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index a = 0; a < A; ++a) {
      const double r = rewards_(s, a);
      if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
        std::ostringstream msg;
        msg << "TabularMDP: rewards[" << s << "][" << a << "] = " << r << " outside [0, 1]";
        throw DomainError(msg.str());
      }
      const auto row = transitions_.row(s * A + a);
      for (Eigen::Index j = 0; j < S; ++j) {
        if (!std::isfinite(row(j)) || row(j) < 0.0) {
          std::ostringstream msg;
          msg << "TabularMDP: transitions[" << s << "][" << a << "][" << j << "] = " << row(j)
              << " is not a probability";
          throw DomainError(msg.str());
        }
      }
      const double total = row.sum();
      if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "TabularMDP: transitions[" << s << "][" << a << "] sums to " << total;
        throw DomainError(msg.str());
      }
    }
  }
}

bool TabularMDP::is_deterministic() const {
  for (Eigen::Index i = 0; i < transitions_.rows(); ++i) {
    if (transitions_.row(i).maxCoeff() != 1.0) return false;
  }
  return true;
}

TabularMDP make_mdp(const std::vector<std::vector<std::vector<double>>>& transitions,
                    const std::vector<std::vector<double>>& rewards) {
  const std::size_t S = rewards.size();
  if (S == 0) throw DomainError("make_mdp: no states");
  const std::size_t A = rewards.front().size();
  if (transitions.size() != S) throw DomainError("make_mdp: transitions and rewards disagree on S");
  RowMatrix p(S * A, S);
  QTable r(S, A);
  for (std::size_t s = 0; s < S; ++s) {
    if (rewards[s].size() != A || transitions[s].size() != A) {
      throw DomainError("make_mdp: ragged action dimension at state " + std::to_string(s));
    }
    for (std::size_t a = 0; a < A; ++a) {
      r(s, a) = rewards[s][a];
      if (transitions[s][a].size() != S) {
        throw DomainError("make_mdp: transitions[" + std::to_string(s) + "][" + std::to_string(a) +
                          "] has wrong length");
      }
      for (std::size_t j = 0; j < S; ++j) p(s * A + a, j) = transitions[s][a][j];
    }
  }
  return TabularMDP(std::move(p), std::move(r));
}

Vector flatten(const QTable& q) { return Eigen::Map<const Vector>(q.data(), q.size()); }

QTable unflatten(const Vector& v, int num_states, int num_actions) {
  if (v.size() != static_cast<Eigen::Index>(num_states) * num_actions) {
    throw DomainError("unflatten: length does not match table shape");
  }
  return Eigen::Map<const QTable>(v.data(), num_states, num_actions);
}

void check_shape(const TabularMDP& m, const QTable& q, const char* what) {
  if (q.rows() != m.num_states() || q.cols() != m.num_actions()) {
    std::ostringstream msg;
    msg << what << ": table is " << q.rows() << "x" << q.cols() << ", MDP is " << m.num_states()
        << "x" << m.num_actions();
    throw DomainError(msg.str());
  }
}

Vector greedy_values(const QTable& q) { return q.rowwise().maxCoeff(); }

std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> policy(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    policy[s] = static_cast<int>(best);
  }
  return policy;
}

namespace {

// r + scale * P max Q, reshaped to a table.
QTable expected_backup(const TabularMDP& m, const QTable& q, double scale) {
  const Vector next = m.transitions() * greedy_values(q);
  QTable out = m.rewards();
  out += scale * unflatten(next, m.num_states(), m.num_actions());
  return out;
}

}  // namespace

QTable bellman_discounted(const TabularMDP& m, const QTable& q, double gamma) {
  check_shape(m, q, "bellman_discounted");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("bellman_discounted: gamma must lie in (0, 1)");
  return expected_backup(m, q, gamma);
}

QTable bellman_average(const TabularMDP& m, const QTable& q, double v_star) {
  check_shape(m, q, "bellman_average");
  QTable out = expected_backup(m, q, 1.0);
  out.array() -= v_star;
  return out;
}

double AnchorFunction::operator()(const QTable& q) const {
  switch (kind_) {
    case Kind::Max:
      return q.maxCoeff();
    case Kind::Min:
      return q.minCoeff();
    case Kind::Mean:
      return q.mean();
    case Kind::Coordinate:
      if (state_ < 0 || state_ >= q.rows() || action_ < 0 || action_ >= q.cols()) {
        throw DomainError("AnchorFunction: coordinate outside the table");
      }
      return q(state_, action_);
  }
  return 0.0;
}

std::string AnchorFunction::name() const {
  switch (kind_) {
    case Kind::Max:
      return "max";
    case Kind::Min:
      return "min";
    case Kind::Mean:
      return "mean";
    case Kind::Coordinate:
      return "coordinate(" + std::to_string(state_) + "," + std::to_string(action_) + ")";
  }
  return "?";
}

DiscountedSolution solve_discounted_exact(const TabularMDP& m, double gamma, double tol) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("solve_discounted_exact: gamma must lie in (0, 1)");
  if (!(tol > 0.0)) throw DomainError("solve_discounted_exact: tol must be positive");
  const double stop = tol * (1.0 - gamma) / (2.0 * gamma);
  DiscountedSolution out;
  QTable q = QTable::Zero(m.num_states(), m.num_actions());
  for (;;) {
    QTable next = bellman_discounted(m, q, gamma);
    ++out.iterations;
    const double step = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (step <= stop) break;
  }
  out.q_star = std::move(q);
  out.within_norm_bound = out.q_star.cwiseAbs().maxCoeff() <= m.r_max() / (1.0 - gamma) + tol;
  return out;
}

AverageSolution solve_average_exact(const TabularMDP& m, double tol, int max_iterations) {
  if (!(tol > 0.0)) throw DomainError("solve_average_exact: tol must be positive");
  QTable q = QTable::Zero(m.num_states(), m.num_actions());
  for (int it = 1; it <= max_iterations; ++it) {
    const QTable diff = expected_backup(m, q, 1.0) - q;
    const double hi = diff.maxCoeff();
    const double lo = diff.minCoeff();
    if (hi - lo <= tol) {
      AverageSolution out;
      out.v_star = 0.5 * (hi + lo);
      out.q_star = q.array() - q.maxCoeff();
      out.iterations = it;
      return out;
    }
    q += 0.5 * diff;
    q.array() -= q.maxCoeff();
  }
  throw std::runtime_error("solve_average_exact: no convergence within " + std::to_string(max_iterations) +
                           " sweeps; the MDP is probably not unichain");
}

namespace {

// Number of closed strongly connected components of the support graph.
int closed_class_count(const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), component(n, -1), stack;
  std::vector<bool> on_stack(n, false);
  int counter = 0, components = 0;

  std::function<void(int)> strongconnect = [&](int v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (int w : adj[v]) {
      if (index[w] < 0) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component[w] = components;
      } while (w != v);
      ++components;
    }
  };
  for (int v = 0; v < n; ++v) {
    if (index[v] < 0) strongconnect(v);
  }

  std::vector<bool> leaves(components, false);
  for (int v = 0; v < n; ++v) {
    for (int w : adj[v]) {
      if (component[w] != component[v]) leaves[component[v]] = true;
    }
  }
  return static_cast<int>(std::count(leaves.begin(), leaves.end(), false));
}

}  // namespace

bool check_unichain(const TabularMDP& m) {
  const int S = m.num_states();
  const int A = m.num_actions();
  const double size = S * std::pow(static_cast<double>(A), S);
  if (size > kUnichainEnumerationLimit) {
    std::ostringstream msg;
    msg << "check_unichain: S * A^S = " << size << " exceeds the enumeration limit "
        << kUnichainEnumerationLimit;
    throw DomainError(msg.str());
  }
  std::vector<int> policy(S, 0);
  std::vector<std::vector<int>> adj(S);
  for (;;) {
    for (int s = 0; s < S; ++s) {
      adj[s].clear();
      for (int j = 0; j < S; ++j) {
        if (m.probability(s, policy[s], j) > 0.0) adj[s].push_back(j);
      }
    }
    if (closed_class_count(adj) != 1) return false;
    // odometer increment over A^S policies
    int s = 0;
    while (s < S && ++policy[s] == A) policy[s++] = 0;
    if (s == S) break;
  }
  return true;
}

int generative_sample(const TabularMDP& m, int s, int a, RngStream& rng) {
  if (s < 0 || s >= m.num_states() || a < 0 || a >= m.num_actions()) {
    throw DomainError("generative_sample: state or action out of range");
  }
  return static_cast<int>(rng.categorical(m.row(s, a)));
}

QTable sampled_next_values(const TabularMDP& m, const QTable& q, std::uint64_t k, RngStream& rng) {
  check_shape(m, q, "sampled_next_values");
  if (k == 0) throw DomainError("sampled_next_values: batch size must be >= 1");
  const Vector values = greedy_values(q);
  const double kd = static_cast<double>(k);
  const int S = m.num_states();
  QTable out(S, m.num_actions());
  std::vector<std::uint64_t> counts(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < m.num_actions(); ++a) {
      if (k <= kExplicitSampleLimit) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint64_t i = 0; i < k; ++i) ++counts[rng.categorical(m.row(s, a))];
      } else {
        counts = rng.multinomial(k, m.row(s, a));
      }
      // Weights c_j / k are exactly 1 on a point mass, so deterministic rows
      // reproduce the expected backup bit for bit.
      double total = 0.0;
      for (int j = 0; j < S; ++j) {
        if (counts[j] != 0) total += (static_cast<double>(counts[j]) / kd) * values(j);
      }
      out(s, a) = total;
    }
  }
  return out;
}

}  // namespace halpern
