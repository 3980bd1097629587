#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "halpern/experiments.hpp"

namespace halpern {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& problem) {
  throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + problem);
}

// Object view that records which keys were read so leftovers can be rejected.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return join(path_, key); }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json& required(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) fail(path_, "missing field \"" + key + "\"");
    return j_.at(key);
  }
  const json* optional(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  double number(const std::string& key) { return as_number(required(key), at(key)); }
  std::optional<double> opt_number(const std::string& key) {
    const json* v = optional(key);
    return v ? std::optional<double>(as_number(*v, at(key))) : std::nullopt;
  }
  long long integer(const std::string& key) { return as_integer(required(key), at(key)); }
  std::string string(const std::string& key) { return as_string(required(key), at(key)); }
  bool boolean(const std::string& key, bool fallback_when_absent) {
    const json* v = optional(key);
    if (!v) return fallback_when_absent;
    if (!v->is_boolean()) fail(at(key), "expected true or false");
    return v->get<bool>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!seen_.count(key)) fail(at(key), "unknown field");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
  }
  static long long as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long long>();
  }
  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vector parse_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = Fields::as_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Matrix parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != cols || cols == 0) fail(rp, "rows must be equal-length arrays");
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = Fields::as_number(v[i][j], rp + "[" + std::to_string(j) + "]");
  }
  return out;
}

int positive_int(const json& v, const std::string& path, long long max = 1LL << 30) {
  const long long x = Fields::as_integer(v, path);
  if (x < 1 || x > max) fail(path, "must be an integer in [1, " + std::to_string(max) + "]");
  return static_cast<int>(x);
}

template <class F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DomainError& e) {
    fail(path, e.what());
  }
}

BatchSchedule parse_batch(const json& v, const std::string& path, std::optional<double> derived_gamma, int N) {
  Fields f(v, path);
  const std::string type = f.string("type");
  BatchSchedule out = BatchSchedule::constant(1);
  if (type == "constant") {
    const long long k = f.integer("k");
    if (k < 1) fail(f.at("k"), "must be >= 1");
    out = BatchSchedule::constant(static_cast<std::uint64_t>(k));
  } else if (type == "power") {
    const double a = f.number("a");
    out = guarded(f.at("a"), [&] { return BatchSchedule::power(a); });
  } else if (type == "contractive_geometric") {
    std::optional<double> gamma = f.opt_number("gamma");
    if (!gamma) gamma = derived_gamma;
    if (!gamma) fail(path, "\"gamma\" is required here (the operator is not a contraction)");
    out = guarded(path, [&] { return BatchSchedule::contractive_geometric(*gamma, N); });
  } else if (type == "power_six") {
    out = BatchSchedule::power_six();
  } else {
    fail(f.at("type"), "unknown batch schedule \"" + type + "\"");
  }
  f.finish();
  return out;
}

AnchorFunction parse_anchor(const json& v, const std::string& path) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "max") return AnchorFunction::max();
    if (s == "min") return AnchorFunction::min();
    if (s == "mean") return AnchorFunction::mean();
    fail(path, "anchor must be \"max\", \"min\", \"mean\" or {\"state\": s, \"action\": a}");
  }
  Fields f(v, path);
  const long long s = f.integer("state");
  const long long a = f.integer("action");
  f.finish();
  return AnchorFunction::coordinate(static_cast<int>(s), static_cast<int>(a));
}

std::vector<std::uint64_t> parse_seeds(const json& v, const std::string& path) {
  std::vector<std::uint64_t> out;
  if (v.is_string()) {
    out = guarded(path, [&] { return parse_seed_list(v.get<std::string>()); });
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (!v[i].is_number_unsigned()) fail(p, "seeds must be nonnegative integers");
      out.push_back(v[i].get<std::uint64_t>());
    }
  } else {
    fail(path, "expected an array of integers or a range string such as \"1-200\"");
  }
  if (out.empty()) fail(path, "seed list is empty");
  return out;
}

OperatorDescriptor parse_operator(const json& v, const std::string& path, const NormKind& norm) {
  Fields f(v, path);
  const std::string type = f.string("type");
  auto build = [&]() -> OperatorDescriptor {
    if (type == "affine") {
      Matrix A = parse_matrix(f.required("matrix"), f.at("matrix"));
      Vector b = parse_vector(f.required("offset"), f.at("offset"));
      const double gamma = f.number("gamma");
      return guarded(path, [&] { return make_affine(std::move(A), std::move(b), gamma, norm); });
    }
    if (type == "rotation") {
      const double angle = f.number("angle");
      const int dim = positive_int(f.required("dim"), f.at("dim"));
      return guarded(path, [&] { return make_rotation(angle, dim); });
    }
    if (type == "shift_projection") {
      const double lambda = f.number("lambda");
      const int dim = positive_int(f.required("dim"), f.at("dim"));
      return guarded(path, [&] { return make_shift_projection(lambda, dim); });
    }
    if (type == "constant") {
      Vector target = parse_vector(f.required("target"), f.at("target"));
      const double gamma = f.number("gamma");
      return guarded(path, [&] { return make_constant(std::move(target), norm, gamma); });
    }
    if (type == "identity") {
      const int dim = positive_int(f.required("dim"), f.at("dim"));
      return guarded(path, [&] { return make_identity(dim, norm); });
    }
    fail(f.at("type"), "unknown operator \"" + type + "\"");
  };
  OperatorDescriptor op = build();
  f.finish();
  return op;
}

QTable parse_q0(const json& v, const std::string& path, const TabularMDP& m) {
  if (v.is_string()) {
    if (v.get<std::string>() != "zero") fail(path, "expected \"zero\" or an S x A array");
    return QTable::Zero(m.num_states(), m.num_actions());
  }
  const Matrix q = parse_matrix(v, path);
  if (q.rows() != m.num_states() || q.cols() != m.num_actions()) {
    fail(path, "shape " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) + " does not match the MDP (" +
                   std::to_string(m.num_states()) + "x" + std::to_string(m.num_actions()) + ")");
  }
  return q;
}

void parse_fixedpoint(Fields& top, ExperimentConfig& cfg) {
  const OperatorDescriptor op = parse_operator(top.required("operator"), "operator", cfg.norm);

  Fields nf(top.required("noise"), "noise");
  const std::string noise_type = nf.string("type");
  NoiseModel noise = NoNoise{};
  if (noise_type == "none") {
    cfg.noise_sigma = 0.0;
  } else if (noise_type == "gaussian") {
    const json* e = nf.optional("stddev");
    const json* s = nf.optional("sigma");
    if ((e != nullptr) == (s != nullptr)) fail("noise", "give exactly one of \"stddev\" and \"sigma\"");
    const double root_d = std::sqrt(static_cast<double>(op.dim()));
    double stddev = 0.0;
    if (e) {
      stddev = Fields::as_number(*e, "noise.stddev");
    } else {
      stddev = Fields::as_number(*s, "noise.sigma") / root_d;
    }
    if (stddev < 0.0) fail("noise", "noise scale must be >= 0");
    noise = GaussianNoise{stddev};
    cfg.noise_sigma = stddev * root_d;
  } else {
    fail("noise.type", "unknown noise model \"" + noise_type + "\" (fixedpoint supports none, gaussian)");
  }
  nf.finish();
  cfg.oracle.emplace(op, noise);

  cfg.x0 = parse_vector(top.required("x0"), "x0");
  if (cfg.x0.size() != op.dim()) {
    fail("x0", "has dimension " + std::to_string(cfg.x0.size()) + ", operator has " + std::to_string(op.dim()));
  }

  Fields af(top.required("algorithm"), "algorithm");
  const std::string type = af.string("type");
  if (type == "halpern") {
    const std::string step = af.string("step");
    if (step == "classic") cfg.steps = StepSchedule::halpern_classic();
    else if (step == "shifted") cfg.steps = StepSchedule::halpern_shifted();
    else fail("algorithm.step", "expected \"classic\" or \"shifted\"");
    std::optional<double> g;
    if (op.is_contraction()) g = op.gamma();
    cfg.batches = parse_batch(af.required("batch"), "algorithm.batch", g, cfg.N);
  } else if (type == "km") {
    const auto alpha = af.opt_number("alpha");
    const auto exponent = af.opt_number("alpha_exponent");
    if (alpha.has_value() == exponent.has_value()) fail("algorithm", "give exactly one of \"alpha\" and \"alpha_exponent\"");
    cfg.steps = guarded("algorithm", [&] {
      return alpha ? StepSchedule::km_constant(*alpha) : StepSchedule::km_polynomial(*exponent);
    });
  } else {
    fail("algorithm.type", "expected \"halpern\" or \"km\"");
  }
  af.finish();
}

void parse_lowerbound(Fields& top, ExperimentConfig& cfg) {
  Fields inf(top.required("instance"), "instance");
  const double eps = inf.number("epsilon");
  const double kappa = inf.number("kappa_bar");
  const double sigma = inf.number("sigma");
  inf.finish();
  cfg.instance = guarded("instance", [&] { return build_instance(eps, kappa, sigma); });
  cfg.epsilon = eps;
  cfg.norm = NormKind::l1();

  Fields af(top.required("algorithm"), "algorithm");
  const std::string type = af.string("type");
  const int horizon = static_cast<int>(std::min<std::uint64_t>(cfg.instance->n_budget + 1, 1u << 30));
  const BatchSchedule batches = parse_batch(af.required("batch"), "algorithm.batch", std::nullopt, horizon);
  if (type == "halpern") {
    cfg.span_algorithm = SpanAlgorithm::halpern_classic(batches);
  } else if (type == "km") {
    const double alpha = af.number("alpha");
    cfg.span_algorithm = guarded("algorithm.alpha", [&] { return SpanAlgorithm::km_constant(alpha, batches); });
  } else {
    fail("algorithm.type", "expected \"halpern\" or \"km\"");
  }
  af.finish();
  cfg.N = horizon;
}

void parse_mdp_common(Fields& top, ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  const std::string rel = Fields::as_string(top.required("mdp"), "mdp");
  cfg.mdp_path = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base_dir / rel;
  if (!std::filesystem::exists(cfg.mdp_path)) fail("mdp", "file " + cfg.mdp_path.string() + " does not exist");
  cfg.mdp = std::make_shared<const TabularMDP>(load_mdp_file(cfg.mdp_path));
  cfg.q0 = parse_q0(top.required("q0"), "q0", *cfg.mdp);
  cfg.norm = NormKind::linf();
}

void parse_mdp_average(Fields& top, ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  parse_mdp_common(top, cfg, base_dir);
  Fields af(top.required("algorithm"), "algorithm");
  const std::string type = af.string("type");
  if (type == "halpern" || type == "rvi") {
    cfg.anchor = parse_anchor(af.required("anchor"), "algorithm.anchor");
    if (cfg.anchor->kind() == AnchorFunction::Kind::Coordinate &&
        (cfg.anchor->state() < 0 || cfg.anchor->state() >= cfg.mdp->num_states() || cfg.anchor->action() < 0 ||
         cfg.anchor->action() >= cfg.mdp->num_actions())) {
      fail("algorithm.anchor", "coordinate outside the Q-table");
    }
  }
  if (type == "halpern" || type == "benchmark") {
    cfg.q_algorithm = type == "halpern" ? QAlgorithm::Halpern : QAlgorithm::Benchmark;
    if (const json* b = af.optional("batch")) cfg.batches = parse_batch(*b, "algorithm.batch", std::nullopt, cfg.N);
  } else if (type == "rvi") {
    cfg.q_algorithm = QAlgorithm::Rvi;
    cfg.rvi_exponent = af.number("exponent");
    if (!(cfg.rvi_exponent > 0.8 && cfg.rvi_exponent <= 1.0)) fail("algorithm.exponent", "must lie in (4/5, 1]");
  } else {
    fail("algorithm.type", "expected \"halpern\", \"benchmark\" or \"rvi\"");
  }
  af.finish();
}

void parse_mdp_discounted(Fields& top, ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  parse_mdp_common(top, cfg, base_dir);
  cfg.gamma = top.number("gamma");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) fail("gamma", "must lie in (0, 1)");
  const double limit = cfg.mdp->r_max() / (1.0 - cfg.gamma);
  if (cfg.q0.cwiseAbs().maxCoeff() > limit) fail("q0", "||q0||_inf exceeds r_max / (1 - gamma) = " + format_double(limit));

  Fields af(top.required("algorithm"), "algorithm");
  const std::string type = af.string("type");
  if (type == "halpern") {
    cfg.q_algorithm = QAlgorithm::Halpern;
    if (cfg.n_from_bound) {
      const QTable q_star = solve_discounted_exact(*cfg.mdp, cfg.gamma, 1e-10).q_star;
      const double dist0 = (cfg.q0 - q_star).cwiseAbs().maxCoeff();
      const double sigma = 2.0 * cfg.gamma * cfg.mdp->r_max() / (1.0 - cfg.gamma);
      cfg.N = contractive_horizon(dist0, sigma, cfg.gamma, *cfg.epsilon);
    }
    if (const json* b = af.optional("batch")) cfg.batches = parse_batch(*b, "algorithm.batch", cfg.gamma, cfg.N);
  } else if (type == "vanilla") {
    if (cfg.n_from_bound) fail("N", "\"auto\" is only available for the halpern algorithm");
    cfg.q_algorithm = QAlgorithm::Vanilla;
    const auto alpha = af.opt_number("alpha");
    const auto exponent = af.opt_number("alpha_exponent");
    if (alpha.has_value() == exponent.has_value()) fail("algorithm", "give exactly one of \"alpha\" and \"alpha_exponent\"");
    cfg.q_steps = guarded("algorithm", [&] {
      return alpha ? StepSchedule::km_constant(*alpha) : StepSchedule::km_polynomial(*exponent);
    });
  } else {
    fail("algorithm.type", "expected \"halpern\" or \"vanilla\"");
  }
  af.finish();
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::FixedPoint:
      return "fixedpoint";
    case ExperimentKind::LowerBound:
      return "lowerbound";
    case ExperimentKind::MdpAverage:
      return "mdp-avg";
    case ExperimentKind::MdpDiscounted:
      return "mdp-disc";
  }
  return "?";
}

bool CheckSpec::empty() const {
  return !max_final_residual && !max_final_dist && !slope_range && !ratio_numerator_n && !barrier && !within_bound;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  auto to_u64 = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw DomainError("bad seed \"" + s + "\" in \"" + text + "\"");
    }
    return std::stoull(s);
  };
  while (std::getline(ss, part, ',')) {
    part.erase(0, part.find_first_not_of(" \t"));
    part.erase(part.find_last_not_of(" \t") + 1);
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_u64(part));
      continue;
    }
    const std::uint64_t lo = to_u64(part.substr(0, dash));
    const std::uint64_t hi = to_u64(part.substr(dash + 1));
    if (hi < lo) throw DomainError("empty seed range \"" + part + "\"");
    if (hi - lo >= 10'000'000) throw DomainError("seed range \"" + part + "\" is too long");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw DomainError("seed list is empty");
  return out;
}

int contractive_horizon(double dist0, double sigma, double gamma, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("contractive_horizon: epsilon must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("contractive_horizon: gamma must lie in (0, 1)");
  const double target = (dist0 + 2.0 * sigma) / ((1.0 - gamma) * epsilon) - 1.0;
  if (target > 1e9) throw DomainError("contractive_horizon: horizon exceeds 1e9");
  int N = std::max(1, static_cast<int>(std::ceil(target)));
  while (bound_contractive(dist0, sigma, gamma, N) > epsilon) ++N;
  return N;
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  Fields top(doc, "");
  ExperimentConfig cfg;
  const std::string kind = top.string("kind");
  if (kind == "fixedpoint") cfg.kind = ExperimentKind::FixedPoint;
  else if (kind == "lowerbound") cfg.kind = ExperimentKind::LowerBound;
  else if (kind == "mdp-avg") cfg.kind = ExperimentKind::MdpAverage;
  else if (kind == "mdp-disc") cfg.kind = ExperimentKind::MdpDiscounted;
  else fail("kind", "expected fixedpoint, lowerbound, mdp-avg or mdp-disc");

  if (const json* c = top.optional("comment")) cfg.comment = Fields::as_string(*c, "comment");
  cfg.seeds = parse_seeds(top.required("seeds"), "seeds");
  if (const json* o = top.optional("output_dir")) cfg.output_dir = Fields::as_string(*o, "output_dir");
  cfg.epsilon = top.opt_number("epsilon");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) fail("epsilon", "must be positive");

  if (cfg.kind != ExperimentKind::LowerBound) {
    const json& n = top.required("N");
    if (n.is_string() && n.get<std::string>() == "auto") {
      if (cfg.kind != ExperimentKind::MdpDiscounted) fail("N", "\"auto\" is only available for mdp-disc");
      if (!cfg.epsilon) fail("N", "\"auto\" needs the top-level \"epsilon\"");
      cfg.n_from_bound = true;
    } else {
      cfg.N = positive_int(n, "N");
    }
  }
  if (cfg.kind == ExperimentKind::FixedPoint) {
    const std::string norm = top.string("norm");
    try {
      cfg.norm = NormKind::parse(norm);
    } catch (const std::exception& e) {
      fail("norm", e.what());
    }
  }

  switch (cfg.kind) {
    case ExperimentKind::FixedPoint:
      parse_fixedpoint(top, cfg);
      break;
    case ExperimentKind::LowerBound:
      parse_lowerbound(top, cfg);
      break;
    case ExperimentKind::MdpAverage:
      parse_mdp_average(top, cfg, base_dir);
      break;
    case ExperimentKind::MdpDiscounted:
      parse_mdp_discounted(top, cfg, base_dir);
      break;
  }

  if (const json* r = top.optional("rate_fit")) {
    Fields rf(*r, "rate_fit");
    cfg.rate_fit.enabled = rf.boolean("enabled", true);
    cfg.rate_fit.envelope = rf.boolean("envelope", false);
    if (const json* w = rf.optional("window")) {
      if (!w->is_array() || w->size() != 2) fail("rate_fit.window", "expected [lo, hi]");
      const double lo = Fields::as_number((*w)[0], "rate_fit.window[0]");
      const double hi = Fields::as_number((*w)[1], "rate_fit.window[1]");
      if (!(lo > 0.0 && hi > lo)) fail("rate_fit.window", "need 0 < lo < hi");
      cfg.rate_fit.window = std::make_pair(lo, hi);
    }
    if (const json* c = rf.optional("column")) {
      cfg.rate_fit.column = Fields::as_string(*c, "rate_fit.column");
      if (cfg.rate_fit.column != "residual" && cfg.rate_fit.column != "dist_to_fp") {
        fail("rate_fit.column", "expected \"residual\" or \"dist_to_fp\"");
      }
    }
    rf.finish();
  }

  if (const json* b = top.optional("bounds")) {
    Fields bf(*b, "bounds");
    const std::string type = bf.string("type");
    if (type == "nonexpansive") {
      if (cfg.kind != ExperimentKind::FixedPoint) fail("bounds.type", "nonexpansive bounds apply to fixedpoint runs");
      cfg.bounds.type = BoundSpec::Type::Nonexpansive;
      if (const auto M = bf.opt_number("M")) {
        if (*M < 0.0) fail("bounds.M", "must be >= 0");
        cfg.bounds.range_bound = *M;
      } else if (const auto* s = std::get_if<ShiftProjection>(&cfg.oracle->base().kind())) {
        cfg.bounds.range_bound = s->dim * s->lambda;
      } else {
        fail("bounds", "\"M\" is required unless the operator is a shift_projection");
      }
    } else if (type == "contractive") {
      cfg.bounds.type = BoundSpec::Type::Contractive;
      if (cfg.kind == ExperimentKind::FixedPoint) {
        if (!cfg.oracle->base().is_contraction()) fail("bounds.type", "the operator is not a contraction");
        if (!fixed_point_info(cfg.oracle->base()).known_fixed_point) fail("bounds", "no known fixed point");
      } else if (!(cfg.kind == ExperimentKind::MdpDiscounted && cfg.q_algorithm == QAlgorithm::Halpern)) {
        fail("bounds.type", "contractive bounds apply to fixedpoint and halpern mdp-disc runs");
      }
    } else {
      fail("bounds.type", "expected \"nonexpansive\" or \"contractive\"");
    }
    bf.finish();
  }

  if (const json* c = top.optional("check")) {
    Fields cf(*c, "check");
    cfg.checks.max_final_residual = cf.opt_number("max_final_residual");
    cfg.checks.max_final_dist = cf.opt_number("max_final_dist");
    if (const json* s = cf.optional("slope_range")) {
      if (!s->is_array() || s->size() != 2) fail("check.slope_range", "expected [lo, hi]");
      cfg.checks.slope_range = std::make_pair(Fields::as_number((*s)[0], "check.slope_range[0]"),
                                              Fields::as_number((*s)[1], "check.slope_range[1]"));
    }
    if (const json* r = cf.optional("residual_ratio")) {
      Fields rf(*r, "check.residual_ratio");
      cfg.checks.ratio_numerator_n = static_cast<int>(rf.integer("n"));
      cfg.checks.ratio_denominator_n = static_cast<int>(rf.integer("reference_n"));
      cfg.checks.ratio_max = rf.number("max");
      rf.finish();
    }
    cfg.checks.barrier = cf.boolean("barrier", false);
    cfg.checks.within_bound = cf.boolean("within_bound", false);
    if (cfg.checks.barrier && cfg.kind != ExperimentKind::LowerBound) fail("check.barrier", "only for lowerbound runs");
    if (cfg.checks.within_bound && cfg.bounds.type == BoundSpec::Type::None) {
      fail("check.within_bound", "needs a \"bounds\" section");
    }
    cf.finish();
  }

  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = parse_config(doc, path.parent_path());
  cfg.source = path;
  return cfg;
}

}  // namespace halpern
