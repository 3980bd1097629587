#include "halpern/oracle.hpp"

#include <cmath>

namespace halpern {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_dim(const OracleDescriptor& o, const Vector& x, const char* who) {
  if (x.size() != o.dim()) {
    throw DomainError(std::string(who) + ": input has dimension " + std::to_string(x.size()) +
                      ", oracle expects " + std::to_string(o.dim()));
  }
}

Vector generative_batch(const OperatorDescriptor& base, const Vector& x, std::uint64_t k, RngStream& rng) {
  if (const auto* b = std::get_if<BellmanDiscountedMap>(&base.kind())) {
    const auto& m = *b->mdp;
    const QTable q = unflatten(x, m.num_states(), m.num_actions());
    const QTable next = sampled_next_values(m, q, k, rng);
    return flatten(m.rewards() + b->gamma * next);
  }
  const auto& b = std::get<BellmanAverageMap>(base.kind());
  const auto& m = *b.mdp;
  const QTable q = unflatten(x, m.num_states(), m.num_actions());
  QTable out = m.rewards() + sampled_next_values(m, q, k, rng);
  out.array() -= b.v_star;
  return flatten(out);
}

}  // namespace

OracleDescriptor::OracleDescriptor(OperatorDescriptor base, NoiseModel noise)
    : base_(std::move(base)), noise_(std::move(noise)) {
  std::visit(Overloaded{
                 [](const NoNoise&) {},
                 [](const GaussianNoise& g) {
                   if (!(g.stddev >= 0.0) || !std::isfinite(g.stddev)) {
                     throw DomainError("GaussianNoise: stddev must be finite and >= 0");
                   }
                 },
                 [this](const ResistantBernoulli& r) {
                   if (!(r.p > 0.0 && r.p < 1.0)) throw DomainError("ResistantBernoulli: p must lie in (0, 1)");
                   if (!std::holds_alternative<ShiftProjection>(base_.kind())) {
                     throw DomainError("ResistantBernoulli attaches only to a ShiftProjection operator");
                   }
                 },
                 [this](const MdpGenerative&) {
                   if (!std::holds_alternative<BellmanDiscountedMap>(base_.kind()) &&
                       !std::holds_alternative<BellmanAverageMap>(base_.kind())) {
                     throw DomainError("MdpGenerative attaches only to a Bellman operator");
                   }
                 },
             },
             noise_);
}

int progress(const Vector& x) {
  for (Eigen::Index i = x.size(); i > 0; --i) {
    if (std::abs(x(i - 1)) > 0.0) return static_cast<int>(i);
  }
  return 0;
}

Vector query(const OracleDescriptor& o, const Vector& x, RngStream& rng) {
  check_dim(o, x, "query");
  return std::visit(Overloaded{
                        [&](const NoNoise&) -> Vector { return apply(o.base(), x); },
                        [&](const GaussianNoise& g) -> Vector {
                          Vector out = apply(o.base(), x);
                          for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += g.stddev * rng.normal();
                          return out;
                        },
                        [&](const ResistantBernoulli& r) -> Vector {
                          Vector out = apply(o.base(), x);
                          const int prog = progress(x);
                          if (prog < o.dim()) {
                            const bool xi = rng.bernoulli(r.p);
                            out(prog) = xi ? out(prog) / r.p : 0.0;
                          }
                          return out;
                        },
                        [&](const MdpGenerative&) -> Vector { return generative_batch(o.base(), x, 1, rng); },
                    },
                    o.noise());
}

Vector minibatch(const OracleDescriptor& o, const Vector& x, std::uint64_t k, RngStream& rng) {
  check_dim(o, x, "minibatch");
  if (k == 0) throw DomainError("minibatch: batch size must be >= 1");
  const double kd = static_cast<double>(k);
  return std::visit(
      Overloaded{
          [&](const NoNoise&) -> Vector { return apply(o.base(), x); },
          [&](const GaussianNoise& g) -> Vector {
            Vector out = apply(o.base(), x);
            if (k <= kExplicitBatchLimit) {
              Vector noise = Vector::Zero(out.size());
              for (std::uint64_t j = 0; j < k; ++j) {
                for (Eigen::Index i = 0; i < out.size(); ++i) noise(i) += g.stddev * rng.normal();
              }
              out += noise / kd;
            } else {
              const double scale = g.stddev / std::sqrt(kd);
              for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += scale * rng.normal();
            }
            return out;
          },
          [&](const ResistantBernoulli& r) -> Vector {
            Vector out = apply(o.base(), x);
            const int prog = progress(x);
            if (prog < o.dim()) {
              std::uint64_t successes = 0;
              if (k <= kExplicitBatchLimit) {
                for (std::uint64_t j = 0; j < k; ++j) successes += rng.bernoulli(r.p) ? 1 : 0;
              } else {
                successes = rng.binomial(k, r.p);
              }
              out(prog) = successes == 0 ? 0.0 : out(prog) * (static_cast<double>(successes) / (kd * r.p));
            }
            return out;
          },
          [&](const MdpGenerative&) -> Vector { return generative_batch(o.base(), x, k, rng); },
      },
      o.noise());
}

OracleMoments empirical_moments(const OracleDescriptor& o, const Vector& x, int m, RngStream& rng) {
  check_dim(o, x, "empirical_moments");
  if (m < 2) throw DomainError("empirical_moments: need m >= 2 queries");
  const Vector exact = apply(o.base(), x);
  OracleMoments out;
  out.mean = Vector::Zero(x.size());
  for (int j = 0; j < m; ++j) {
    const Vector sample = query(o, x, rng);
    out.mean += sample;
    out.second_moment += (sample - exact).squaredNorm();
  }
  out.mean /= static_cast<double>(m);
  out.second_moment /= static_cast<double>(m);
  return out;
}

}  // namespace halpern
