#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include "halpern/experiments.hpp"

namespace halpern {

namespace {

using nlohmann::json;

struct SeedOutcome {
  RunRecord record;
  std::vector<int> progress;
};

struct SharedSolutions {
  std::optional<double> v_star;
  std::optional<QTable> q_star;
};

SeedOutcome run_seed(const ExperimentConfig& cfg, const SharedSolutions& shared, std::uint64_t seed) {
  RngStream rng(seed, 0);
  SeedOutcome out;
  switch (cfg.kind) {
    case ExperimentKind::FixedPoint:
      if (cfg.steps->is_halpern()) {
        out.record = halpern_run(*cfg.oracle, cfg.x0, *cfg.steps, *cfg.batches, cfg.N, cfg.norm, rng);
      } else {
        out.record = km_run(*cfg.oracle, cfg.x0, *cfg.steps, cfg.N, cfg.norm, rng);
      }
      break;
    case ExperimentKind::LowerBound: {
      AdversarialTrace trace = run_adversarial(*cfg.instance, *cfg.span_algorithm, rng);
      for (const auto& row : trace.rows) out.progress.push_back(row.prog);
      out.record = std::move(trace.record);
      break;
    }
    case ExperimentKind::MdpAverage: {
      QOptions opts;
      opts.v_star = shared.v_star;
      opts.batches = cfg.batches;
      const TabularMDP& m = *cfg.mdp;
      if (cfg.q_algorithm == QAlgorithm::Halpern) {
        out.record = halpern_q_average(m, *cfg.anchor, cfg.q0, cfg.N, rng, opts).record;
      } else if (cfg.q_algorithm == QAlgorithm::Benchmark) {
        out.record = benchmark_q_average(m, *shared.v_star, cfg.q0, cfg.N, rng, opts).record;
      } else {
        out.record = rvi_q_learning(m, *cfg.anchor, cfg.rvi_exponent, cfg.q0, cfg.N, rng, opts).record;
      }
      break;
    }
    case ExperimentKind::MdpDiscounted: {
      QOptions opts;
      opts.q_star = shared.q_star;
      opts.batches = cfg.batches;
      const TabularMDP& m = *cfg.mdp;
      if (cfg.q_algorithm == QAlgorithm::Halpern) {
        out.record = halpern_q_discounted(m, cfg.gamma, cfg.q0, cfg.N, rng, opts).record;
      } else {
        out.record = vanilla_q_discounted(m, cfg.gamma, *cfg.q_steps, cfg.q0, cfg.N, rng, opts).record;
      }
      break;
    }
  }
  return out;
}

SharedSolutions solve_shared(const ExperimentConfig& cfg) {
  SharedSolutions shared;
  if (cfg.kind == ExperimentKind::MdpAverage) shared.v_star = solve_average_exact(*cfg.mdp, 1e-12).v_star;
  if (cfg.kind == ExperimentKind::MdpDiscounted) shared.q_star = solve_discounted_exact(*cfg.mdp, cfg.gamma, 1e-10).q_star;
  return shared;
}

std::vector<SeedOutcome> run_all(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs,
                                 const SharedSolutions& shared) {
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        outcomes[i] = run_seed(cfg, shared, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, seeds.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outcomes;
}

const AggregateRow* row_at(const std::vector<AggregateRow>& agg, int n) {
  for (const auto& r : agg) {
    if (r.n == n) return &r;
  }
  return nullptr;
}

json rate_fit_json(const ExperimentConfig& cfg, const std::vector<AggregateRow>& agg) {
  if (!cfg.rate_fit.enabled) return nullptr;
  std::vector<double> ns, vals;
  for (const auto& r : agg) {
    if (r.n < 1) continue;
    std::optional<double> v = r.mean_residual;
    if (cfg.rate_fit.column == "dist_to_fp") v = r.mean_dist;
    if (!v) return json{{"error", "column " + cfg.rate_fit.column + " is not available"}};
    ns.push_back(r.n);
    vals.push_back(*v);
  }
  try {
    const RateFit fit = fit_rate(ns, vals, cfg.rate_fit.window, cfg.rate_fit.envelope);
    return json{{"column", cfg.rate_fit.column}, {"slope", fit.slope},         {"intercept", fit.intercept},
                {"r_squared", fit.r_squared},   {"window", {fit.window_lo, fit.window_hi}},
                {"points", fit.points},         {"envelope", fit.envelope}};
  } catch (const DomainError& e) {
    return json{{"column", cfg.rate_fit.column}, {"error", e.what()}};
  }
}

json final_json(const std::vector<AggregateRow>& agg) {
  if (agg.empty()) return nullptr;
  const AggregateRow& r = agg.back();
  json out{{"n", r.n}, {"count", r.count}, {"mean_residual", r.mean_residual}, {"mean_cum_queries", r.mean_cum_queries}};
  out["se_residual"] = r.se_residual ? json(*r.se_residual) : json(nullptr);
  out["mean_dist_to_fp"] = r.mean_dist ? json(*r.mean_dist) : json(nullptr);
  out["se_dist_to_fp"] = r.se_dist ? json(*r.se_dist) : json(nullptr);
  return out;
}

json lowerbound_json(const ExperimentConfig& cfg, const std::vector<SeedOutcome>& outcomes,
                     const std::vector<AggregateRow>& agg) {
  const AdversarialInstance& inst = *cfg.instance;
  json steps = json::array();
  bool held = true;
  double final_fraction = 0.0;
  int final_n = -1;
  for (std::size_t i = 0; i < agg.size(); ++i) {
    if (agg[i].mean_cum_queries > static_cast<double>(inst.n_budget)) continue;
    std::size_t below = 0, total = 0;
    for (const auto& o : outcomes) {
      if (i < o.progress.size()) {
        ++total;
        if (o.progress[i] < inst.d) ++below;
      }
    }
    const double fraction = total ? static_cast<double>(below) / static_cast<double>(total) : 0.0;
    held = held && agg[i].mean_residual > inst.epsilon;
    steps.push_back({{"n", agg[i].n},
                     {"cum_queries", agg[i].mean_cum_queries},
                     {"mean_residual", agg[i].mean_residual},
                     {"prog_below_d_fraction", fraction}});
    final_fraction = fraction;
    final_n = agg[i].n;
  }
  return json{{"epsilon", inst.epsilon},
              {"kappa_bar", inst.kappa_bar},
              {"sigma", inst.sigma},
              {"lambda", inst.lambda},
              {"d", inst.d},
              {"p", inst.p},
              {"n_budget", inst.n_budget},
              {"algorithm", cfg.span_algorithm->name()},
              {"feasible_steps", steps},
              {"last_feasible_n", final_n},
              {"barrier_held", held},
              {"prob_prog_below_d_final", final_fraction}};
}

json check_item(const std::string& name, bool passed, const std::string& detail) {
  return json{{"name", name}, {"passed", passed}, {"detail", detail}};
}

}  // namespace

json evaluate_bounds(const ExperimentConfig& cfg, const std::vector<AggregateRow>& agg) {
  switch (cfg.bounds.type) {
    case BoundSpec::Type::None:
      return nullptr;
    case BoundSpec::Type::Nonexpansive: {
      if (cfg.kind != ExperimentKind::FixedPoint || !cfg.steps || !cfg.steps->is_halpern() || !cfg.batches) {
        throw ConfigError("bounds: the nonexpansive bound needs a fixedpoint Halpern run");
      }
      if (cfg.oracle->base().gamma() > 1.0) throw ConfigError("bounds: operator is not nonexpansive");
      const double kappa = kappa_bar_bounded_range(cfg.bounds.range_bound, cfg.x0, cfg.norm);
      const double mu = norm_equivalence_mu(cfg.norm, cfg.oracle->dim());
      const std::vector<double> sigmas = minibatch_sigma_sequence(mu, cfg.noise_sigma, *cfg.batches, cfg.N);
      json rows = json::array();
      bool all = true;
      for (const auto& r : agg) {
        if (r.n < 1) continue;
        const double b = bound_nonexpansive(kappa, sigmas, r.n);
        const bool within = r.mean_residual <= b;
        all = all && within;
        rows.push_back({{"n", r.n}, {"bound", b}, {"empirical_mean", r.mean_residual}, {"within_bound", within}});
      }
      return json{{"type", "nonexpansive"}, {"kappa_bar", kappa}, {"M", cfg.bounds.range_bound},
                  {"mu", mu},               {"sigma", cfg.noise_sigma}, {"rows", rows},
                  {"all_within", all}};
    }
    case BoundSpec::Type::Contractive: {
      double dist0 = 0.0, sigma = 0.0, gamma = 0.0, mu = 1.0;
      if (cfg.kind == ExperimentKind::FixedPoint) {
        const auto x_star = fixed_point_info(cfg.oracle->base()).known_fixed_point;
        if (!x_star) throw ConfigError("bounds: the operator has no known fixed point");
        gamma = cfg.oracle->base().gamma();
        if (!(gamma < 1.0)) throw ConfigError("bounds: the operator is not a contraction");
        mu = norm_equivalence_mu(cfg.norm, cfg.oracle->dim());
        dist0 = norm(cfg.x0 - *x_star, cfg.norm);
        sigma = mu * cfg.noise_sigma;
      } else if (cfg.kind == ExperimentKind::MdpDiscounted) {
        const QTable q_star = solve_discounted_exact(*cfg.mdp, cfg.gamma, 1e-10).q_star;
        gamma = cfg.gamma;
        dist0 = (cfg.q0 - q_star).cwiseAbs().maxCoeff();
        sigma = 2.0 * cfg.gamma * cfg.mdp->r_max() / (1.0 - cfg.gamma);
      } else {
        throw ConfigError("bounds: the contractive bound needs a fixedpoint or mdp-disc run");
      }
      const AggregateRow* last = row_at(agg, cfg.N);
      if (!last || !last->mean_dist) throw ConfigError("bounds: no distance to the fixed point at n = N");
      const double b = bound_contractive(dist0, sigma, gamma, cfg.N);
      const bool within = *last->mean_dist <= b;
      json rows = json::array();
      rows.push_back({{"n", cfg.N}, {"bound", b}, {"empirical_mean", *last->mean_dist}, {"within_bound", within}});
      return json{{"type", "contractive"}, {"dist0", dist0}, {"sigma", sigma}, {"mu", mu},
                  {"gamma", gamma},       {"rows", rows},   {"all_within", within}};
    }
  }
  return nullptr;
}

ExperimentResult simulate(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs) {
  if (seeds.empty()) throw ConfigError("seeds: seed list is empty");
  const SharedSolutions shared = solve_shared(cfg);
  const std::vector<SeedOutcome> outcomes = run_all(cfg, seeds, jobs, shared);

  ExperimentResult result;
  result.seeds = seeds;
  for (const auto& o : outcomes) result.runs.push_back(o.record);
  result.aggregate = aggregate_runs(result.runs);

  json& s = result.summary;
  s["kind"] = kind_name(cfg.kind);
  if (!cfg.comment.empty()) s["comment"] = cfg.comment;
  s["N"] = cfg.N;
  s["norm"] = cfg.norm.name();
  s["seeds"] = seeds;
  json aborted = json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].record.aborted) {
      aborted.push_back({{"seed", seeds[i]}, {"message", outcomes[i].record.abort_message}});
    }
  }
  result.any_aborted = !aborted.empty();
  s["aborted"] = result.any_aborted;
  s["aborted_runs"] = aborted;
  s["final"] = final_json(result.aggregate);
  s["rate_fit"] = rate_fit_json(cfg, result.aggregate);
  s["bounds"] = evaluate_bounds(cfg, result.aggregate);

  switch (cfg.kind) {
    case ExperimentKind::FixedPoint:
      s["operator"] = cfg.oracle->base().describe();
      s["steps"] = cfg.steps->name();
      if (cfg.batches && cfg.steps->is_halpern()) s["batches"] = cfg.batches->name();
      s["noise_sigma"] = cfg.noise_sigma;
      break;
    case ExperimentKind::LowerBound:
      s["lowerbound"] = lowerbound_json(cfg, outcomes, result.aggregate);
      break;
    case ExperimentKind::MdpAverage:
      s["v_star"] = *shared.v_star;
      s["benchmark_growth_rate"] = benchmark_growth_rate(*cfg.mdp, *shared.v_star);
      s["mdp"] = cfg.mdp_path.string();
      break;
    case ExperimentKind::MdpDiscounted:
      s["gamma"] = cfg.gamma;
      s["q_star_sup_norm"] = shared.q_star->cwiseAbs().maxCoeff();
      s["n_from_bound"] = cfg.n_from_bound;
      s["mdp"] = cfg.mdp_path.string();
      break;
  }

  // Checks.
  json items = json::array();
  const CheckSpec& c = cfg.checks;
  const AggregateRow* last = result.aggregate.empty() ? nullptr : &result.aggregate.back();
  if (c.max_final_residual) {
    const bool ok = last && last->mean_residual <= *c.max_final_residual;
    items.push_back(check_item("max_final_residual", ok,
                               last ? format_double(last->mean_residual) + " <= " + format_double(*c.max_final_residual)
                                    : "no rows"));
  }
  if (c.max_final_dist) {
    const bool ok = last && last->mean_dist && *last->mean_dist <= *c.max_final_dist;
    items.push_back(check_item("max_final_dist", ok,
                               last && last->mean_dist
                                   ? format_double(*last->mean_dist) + " <= " + format_double(*c.max_final_dist)
                                   : "distance unavailable"));
  }
  if (c.slope_range) {
    const json& fit = s["rate_fit"];
    const bool has = fit.is_object() && fit.contains("slope");
    const bool ok = has && fit["slope"].get<double>() >= c.slope_range->first &&
                    fit["slope"].get<double>() <= c.slope_range->second;
    items.push_back(check_item("slope_range", ok,
                               has ? format_double(fit["slope"].get<double>()) + " in [" +
                                         format_double(c.slope_range->first) + ", " +
                                         format_double(c.slope_range->second) + "]"
                                   : "no rate fit"));
  }
  if (c.ratio_numerator_n) {
    const AggregateRow* num = row_at(result.aggregate, *c.ratio_numerator_n);
    const AggregateRow* den = row_at(result.aggregate, *c.ratio_denominator_n);
    const bool has = num && den && den->mean_residual > 0.0;
    const double ratio = has ? num->mean_residual / den->mean_residual : 0.0;
    items.push_back(check_item("residual_ratio", has && ratio <= c.ratio_max,
                               has ? format_double(ratio) + " <= " + format_double(c.ratio_max) : "rows missing"));
  }
  if (c.barrier) {
    const bool ok = s["lowerbound"]["barrier_held"].get<bool>();
    items.push_back(check_item("barrier", ok, ok ? "mean residual > epsilon at every feasible n" : "barrier broken"));
  }
  if (c.within_bound) {
    const bool ok = s["bounds"].is_object() && s["bounds"]["all_within"].get<bool>();
    items.push_back(check_item("within_bound", ok, ok ? "all rows within the bound" : "bound exceeded"));
  }
  bool passed = true;
  for (const auto& it : items) passed = passed && it["passed"].get<bool>();
  result.checks_passed = passed;
  s["checks"] = {{"passed", passed}, {"items", items}};
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const std::vector<std::uint64_t> seeds = opts.seeds.value_or(cfg.seeds);
  const std::string dir = opts.output_dir.value_or(cfg.output_dir);
  if (dir.empty()) throw ConfigError("output_dir: no output directory (set \"output_dir\" or pass --out)");
  ExperimentResult result = simulate(cfg, seeds, opts.jobs);

  const std::filesystem::path out(dir);
  std::filesystem::create_directories(out);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
  };
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto f = open(out / ("seed_" + std::to_string(seeds[i]) + ".csv"));
    write_run_csv(f, result.runs[i]);
  }
  {
    auto f = open(out / "aggregate.csv");
    write_aggregate_csv(f, result.aggregate);
  }
  {
    auto f = open(out / "summary.json");
    f << result.summary.dump(2) << '\n';
  }
  return result;
}

}  // namespace halpern
