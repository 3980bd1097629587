#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "halpern/iteration_engine.hpp"
#include "halpern/lower_bound_lab.hpp"
#include "halpern/mdp_model.hpp"
#include "halpern/operators.hpp"
#include "halpern/oracle.hpp"
#include "halpern/q_learning.hpp"

namespace halpern {

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// MDP files

/// Parses an MDP document
///   {"num_states": S, "num_actions": A,
///    "transitions": [S][A][S] probabilities, "rewards": [S][A] in [0, 1]}
/// and enforces the TabularMDP invariants. Errors are ConfigErrors of the
/// form "<name>:<line>: <problem>".
TabularMDP parse_mdp_text(const std::string& text, const std::string& name = "<mdp>");
TabularMDP load_mdp_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Rate fits and aggregation

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  /// Inclusive range of n used.
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t points = 0;
  bool envelope = false;
};

/// Least squares of log(value) on log(n) over lo <= n <= hi. Without a
/// window the first 10% of the n range is skipped. `envelope` replaces each
/// value by the maximum over all later n first, which turns traces with
/// exact-zero or round-off dips into their decay profile. Throws DomainError
/// for fewer than 5 points or a nonpositive value in the window.
RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& values,
                 std::optional<std::pair<double, double>> window = std::nullopt, bool envelope = false);

struct AggregateRow {
  int n = 0;
  std::size_t count = 0;
  double step = 0.0;
  std::uint64_t batch = 0;
  double mean_cum_queries = 0.0;
  double mean_residual = 0.0;
  std::optional<double> se_residual;
  std::optional<double> mean_dist;
  std::optional<double> se_dist;
  std::optional<double> mean_noise;
  std::optional<double> se_noise;
};

/// Per-n sample means and standard errors across runs. Rows exist for every
/// n reached by at least one run; optional columns need every run at that n
/// to carry the value.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs);

/// CSV with header n,beta_or_alpha,k_n,cum_queries,residual,dist_to_fp,noise_norm.
void write_run_csv(std::ostream& out, const RunRecord& run);
/// CSV with header n,count,beta_or_alpha,k_n,mean_cum_queries,mean_residual,
/// se_residual,mean_dist_to_fp,se_dist_to_fp,mean_noise_norm,se_noise_norm.
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Reads a CSV with a header row and returns the named numeric columns.
/// Empty cells become NaN.
std::vector<std::vector<double>> read_csv_columns(std::istream& in, const std::vector<std::string>& columns);

/// %.17g
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Configuration

enum class ExperimentKind { FixedPoint, LowerBound, MdpAverage, MdpDiscounted };

std::string kind_name(ExperimentKind kind);

/// "1,2,5-9" style list; ranges are inclusive.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct BoundSpec {
  enum class Type { None, Nonexpansive, Contractive };
  Type type = Type::None;
  /// Range bound M of the operator (nonexpansive).
  double range_bound = 0.0;
};

struct CheckSpec {
  std::optional<double> max_final_residual;
  std::optional<double> max_final_dist;
  std::optional<std::pair<double, double>> slope_range;
  /// mean residual at `ratio_numerator_n` <= ratio_max * mean residual at `ratio_denominator_n`.
  std::optional<int> ratio_numerator_n;
  std::optional<int> ratio_denominator_n;
  double ratio_max = 0.0;
  bool barrier = false;
  bool within_bound = false;

  bool empty() const;
};

struct RateFitSpec {
  bool enabled = true;
  std::optional<std::pair<double, double>> window;
  bool envelope = false;
  /// "residual" or "dist_to_fp".
  std::string column = "residual";
};

enum class QAlgorithm { Halpern, Benchmark, Rvi, Vanilla };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::FixedPoint;
  std::filesystem::path source;
  std::string comment;
  int N = 0;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  NormKind norm = NormKind::l2();
  std::optional<double> epsilon;
  RateFitSpec rate_fit;
  BoundSpec bounds;
  CheckSpec checks;

  // fixedpoint
  std::optional<OracleDescriptor> oracle;
  Vector x0;
  std::optional<StepSchedule> steps;
  std::optional<BatchSchedule> batches;
  /// sqrt(E ||U||_2^2) of a single query.
  double noise_sigma = 0.0;

  // lowerbound
  std::optional<AdversarialInstance> instance;
  std::optional<SpanAlgorithm> span_algorithm;

  // mdp-avg, mdp-disc
  std::filesystem::path mdp_path;
  MdpHandle mdp;
  QAlgorithm q_algorithm = QAlgorithm::Halpern;
  std::optional<AnchorFunction> anchor;
  double rvi_exponent = 1.0;
  std::optional<StepSchedule> q_steps;
  double gamma = 0.0;
  QTable q0;
  bool n_from_bound = false;
};

/// Strict parse: unknown fields, missing fields and wrong types are errors.
/// Relative file references resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Horizon N at which bound_contractive(dist0, sigma, gamma, N) <= epsilon first holds.
int contractive_horizon(double dist0, double sigma, double gamma, double epsilon);

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> output_dir;
  int jobs = 1;
  bool check = false;
};

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregate;
  nlohmann::json summary;
  bool any_aborted = false;
  /// All configured checks passed (true when none are configured).
  bool checks_passed = true;
};

/// Runs every seed, writes seed_<seed>.csv, aggregate.csv and summary.json
/// into the output directory, and returns the in-memory results.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

/// Runs every seed without touching the filesystem.
ExperimentResult simulate(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds, int jobs);

/// Theoretical bound overlay for an aggregate trace. Throws ConfigError when
/// the bound parameters cannot be derived from the configuration.
nlohmann::json evaluate_bounds(const ExperimentConfig& cfg, const std::vector<AggregateRow>& aggregate);

}  // namespace halpern
