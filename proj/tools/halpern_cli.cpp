// Command-line front end for the experiment harness.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "halpern/experiments.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeAbort = 2;
constexpr int kCheckFailed = 3;

struct CommonFlags {
  std::string config;
  std::string out;
  std::string seeds;
  int jobs = 1;
  bool check = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", flags.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seeds", flags.seeds, "Seed list such as 1-200 or 3,5,8 (overrides seeds)");
  cmd->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--check", flags.check, "Exit with status 3 when a configured check fails");
}

int run_kind(halpern::ExperimentKind expected, const CommonFlags& flags) {
  halpern::ExperimentConfig cfg;
  halpern::RunOptions opts;
  try {
    cfg = halpern::load_config(flags.config);
    if (cfg.kind != expected) {
      throw halpern::ConfigError("kind: config is \"" + halpern::kind_name(cfg.kind) + "\" but the subcommand is \"" +
                                 halpern::kind_name(expected) + "\"");
    }
    if (!flags.seeds.empty()) opts.seeds = halpern::parse_seed_list(flags.seeds);
    if (!flags.out.empty()) opts.output_dir = flags.out;
    if (opts.output_dir.value_or(cfg.output_dir).empty()) {
      throw halpern::ConfigError("output_dir: no output directory (set \"output_dir\" or pass --out)");
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  opts.jobs = flags.jobs;
  opts.check = flags.check;

  halpern::ExperimentResult result;
  try {
    result = halpern::run_experiment(cfg, opts);
  } catch (const halpern::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntimeAbort;
  }

  const auto& s = result.summary;
  std::cout << "wrote " << result.seeds.size() << " runs to " << opts.output_dir.value_or(cfg.output_dir) << '\n';
  if (s["final"].is_object()) {
    std::cout << "final n = " << s["final"]["n"] << ", mean residual = " << s["final"]["mean_residual"] << '\n';
  }
  if (s["rate_fit"].is_object() && s["rate_fit"].contains("slope")) {
    std::cout << "rate fit slope = " << s["rate_fit"]["slope"] << " (r^2 = " << s["rate_fit"]["r_squared"] << ")\n";
  }
  if (result.any_aborted) {
    std::cerr << "some runs aborted; see summary.json\n";
    return kRuntimeAbort;
  }
  if (flags.check && !result.checks_passed) {
    for (const auto& item : s["checks"]["items"]) {
      if (!item["passed"].get<bool>()) {
        std::cerr << "check failed: " << item["name"].get<std::string>() << " (" << item["detail"].get<std::string>()
                  << ")\n";
      }
    }
    return kCheckFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Halpern iteration experiments"};
  app.require_subcommand(1);

  CommonFlags fixedpoint_flags, lowerbound_flags, avg_flags, disc_flags;
  add_common(app.add_subcommand("fixedpoint", "Halpern or KM runs on a built-in operator"), fixedpoint_flags);
  add_common(app.add_subcommand("lowerbound", "Span algorithms against the resistant-oracle instance"),
             lowerbound_flags);
  add_common(app.add_subcommand("mdp-avg", "Average-reward Q-learning"), avg_flags);
  add_common(app.add_subcommand("mdp-disc", "Discounted Q-learning"), disc_flags);

  std::string fit_input, fit_column = "mean_residual";
  std::vector<double> fit_window;
  bool fit_envelope = false;
  CLI::App* fit = app.add_subcommand("fit", "Log-log rate fit of an aggregate CSV");
  fit->add_option("--input", fit_input, "aggregate.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--column", fit_column, "Column to fit against n");
  fit->add_option("--window", fit_window, "Inclusive n range: lo hi")->expected(2);
  fit->add_flag("--envelope", fit_envelope, "Fit the running maximum over later n");

  std::string mdp_file;
  CLI::App* validate = app.add_subcommand("validate-mdp", "Check an MDP file");
  validate->add_option("file", mdp_file, "MDP JSON file")->required();
  bool validate_unichain = false;
  validate->add_flag("--unichain", validate_unichain, "Also enumerate policies to check the unichain property");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kConfigError;
  }

  if (*app.get_subcommand("fixedpoint")) return run_kind(halpern::ExperimentKind::FixedPoint, fixedpoint_flags);
  if (*app.get_subcommand("lowerbound")) return run_kind(halpern::ExperimentKind::LowerBound, lowerbound_flags);
  if (*app.get_subcommand("mdp-avg")) return run_kind(halpern::ExperimentKind::MdpAverage, avg_flags);
  if (*app.get_subcommand("mdp-disc")) return run_kind(halpern::ExperimentKind::MdpDiscounted, disc_flags);

  if (*fit) {
    try {
      std::ifstream in(fit_input);
      const auto cols = halpern::read_csv_columns(in, {"n", fit_column});
      std::optional<std::pair<double, double>> window;
      if (fit_window.size() == 2) window = std::make_pair(fit_window[0], fit_window[1]);
      std::vector<double> ns, vals;
      for (std::size_t i = 0; i < cols[0].size(); ++i) {
        if (cols[0][i] < 1.0) continue;
        ns.push_back(cols[0][i]);
        vals.push_back(cols[1][i]);
      }
      const halpern::RateFit r = halpern::fit_rate(ns, vals, window, fit_envelope);
      const nlohmann::json out{{"column", fit_column},   {"slope", r.slope},
                               {"intercept", r.intercept}, {"r_squared", r.r_squared},
                               {"window", {r.window_lo, r.window_hi}}, {"points", r.points},
                               {"envelope", r.envelope}};
      std::cout << out.dump(2) << '\n';
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << "fit error: " << e.what() << '\n';
      return kConfigError;
    }
  }

  if (*validate) {
    try {
      const halpern::TabularMDP m = halpern::load_mdp_file(mdp_file);
      std::cout << mdp_file << ": ok (" << m.num_states() << " states, " << m.num_actions() << " actions)\n";
      if (validate_unichain) {
        if (!halpern::check_unichain(m)) {
          std::cerr << mdp_file << ": some deterministic policy has more than one recurrent class\n";
          return kConfigError;
        }
        std::cout << mdp_file << ": unichain\n";
      }
      return kOk;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return kConfigError;
    }
  }
  return kConfigError;
}
