#include "dpbm/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

namespace dpbm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

// Reads one JSON object, recording every problem instead of stopping at the first.
class Reader {
 public:
  Reader(const json& obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (!obj_.is_object()) error("", "must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out, std::function<std::string(const T&)> check = {}) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key) || obj_.at(key).is_null()) return;
    try {
      T value = obj_.at(key).get<T>();
      if (check) {
        const std::string why = check(value);
        if (!why.empty()) {
          error(key, why);
          return;
        }
      }
      out = std::move(value);
    } catch (const json::exception&) {
      error(key, "has the wrong type");
    }
  }

  /// Enum-like string fields parsed by `parse`.
  template <typename T>
  void get_parsed(const std::string& key, T& out, std::function<T(const std::string&)> parse) {
    std::string raw;
    bool present = obj_.is_object() && obj_.contains(key) && !obj_.at(key).is_null();
    get<std::string>(key, raw);
    if (!present || raw.empty()) return;
    try {
      out = parse(raw);
    } catch (const std::exception& e) {
      error(key, e.what());
    }
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    if (!obj_.is_object() || !obj_.contains(key) || obj_.at(key).is_null()) return empty;
    return obj_.at(key);
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void error(const std::string& key, const std::string& why) { errors_.push_back(path(key) + ": " + why); }

  void finish() {
    if (!obj_.is_object()) return;
    for (const auto& [k, _] : obj_.items())
      if (!seen_.count(k)) error(k, "unknown field");
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

template <typename T>
std::function<std::string(const T&)> at_least(T lo) {
  return [lo](const T& v) { return v >= lo ? std::string{} : "must be >= " + std::to_string(lo); };
}

template <typename T>
std::function<std::string(const T&)> positive() {
  return [](const T& v) { return v > T(0) ? std::string{} : "must be > 0"; };
}

std::function<std::string(const double&)> open_unit() {
  return [](const double& v) { return v > 0.0 && v < 1.0 ? std::string{} : "must lie in (0, 1)"; };
}

RegKind parse_reg(const std::string& s) {
  if (s == "zero") return RegKind::zero;
  if (s == "l1") return RegKind::l1;
  if (s == "box") return RegKind::box;
  throw std::invalid_argument("unknown regularizer '" + s + "' (zero, l1, box)");
}

StepSizePolicy::Mode parse_step_mode(const std::string& s) {
  if (s == "fixed") return StepSizePolicy::Mode::fixed;
  if (s == "constant") return StepSizePolicy::Mode::constant;
  if (s == "backtracking") return StepSizePolicy::Mode::backtracking;
  throw std::invalid_argument("unknown step mode '" + s + "' (fixed, constant, backtracking)");
}

std::string to_string(StepSizePolicy::Mode m) {
  switch (m) {
    case StepSizePolicy::Mode::fixed: return "fixed";
    case StepSizePolicy::Mode::constant: return "constant";
    case StepSizePolicy::Mode::backtracking: return "backtracking";
  }
  return "?";
}

DualMethod parse_dual_method(const std::string& s) {
  if (s == "fista") return DualMethod::fista;
  if (s == "adaptive_pg") return DualMethod::adaptive_pg;
  throw std::invalid_argument("unknown dual method '" + s + "' (fista, adaptive_pg)");
}

std::string one_of(const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return {};
  std::string msg = "must be one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  return msg;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields) : std::runtime_error(join_lines(fields)), fields_(std::move(fields)) {}

ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  Reader top(j, "", errors);

  int schema = -1;
  top.get<int>("schema", schema);
  if (schema == -1) errors.push_back("schema: required (current version " + std::to_string(kConfigSchema) + ")");
  else if (schema != kConfigSchema)
    errors.push_back("schema: unsupported version " + std::to_string(schema) + " (expected " +
                     std::to_string(kConfigSchema) + ")");
  top.get<long>("iterations", cfg.iterations, at_least<long>(1));
  top.get<long>("stride", cfg.stride, at_least<long>(1));
  top.get<std::uint64_t>("seed", cfg.seed);
  top.get<std::string>("output", cfg.output);

  {
    Reader r(top.child("problem"), "problem", errors);
    ProblemConfig& p = cfg.problem;
    r.get<std::string>("loss", p.loss, [](const std::string& v) { return one_of(v, {"quadratic", "logistic"}); });
    r.get<std::string>("dataset", p.dataset);
    r.get<Index>("dim", p.dim, at_least<Index>(1));
    r.get<Index>("samples", p.samples, at_least<Index>(1));
    r.get<Index>("max_samples", p.max_samples, at_least<Index>(1));
    r.get<std::string>("labels", p.labels, [](const std::string& v) { return one_of(v, {"one_vs_rest", "signed"}); });
    r.get<double>("positive_label", p.positive_label);
    r.get<bool>("normalize", p.normalize);
    r.get<std::uint64_t>("data_seed", p.data_seed);
    r.get<double>("theta", p.theta, at_least<double>(0.0));
    r.get<double>("curvature", p.curvature, positive<double>());
    Reader reg(r.child("regularizer"), "problem.regularizer", errors);
    reg.get_parsed<RegKind>("kind", p.reg, parse_reg);
    reg.get<double>("lambda", p.lambda, at_least<double>(0.0));
    reg.get<double>("lo", p.lo);
    reg.get<double>("hi", p.hi);
    if (p.reg == RegKind::box && p.lo > p.hi) reg.error("lo", "must be <= hi");
    reg.finish();
    r.finish();
  }
  {
    Reader r(top.child("graph"), "graph", errors);
    GraphConfig& g = cfg.graph;
    r.get_parsed<Topology>("topology", g.topology, parse_topology);
    r.get<Index>("nodes", g.nodes, at_least<Index>(1));
    r.get<double>("edge_probability", g.edge_probability, [](const double& v) {
      return v > 0.0 && v <= 1.0 ? std::string{} : "must lie in (0, 1]";
    });
    r.get<std::string>("edge_list", g.edge_list);
    r.finish();
  }
  {
    Reader r(top.child("algorithm"), "algorithm", errors);
    AlgoConfig& a = cfg.algo;
    r.get_parsed<Algorithm>("name", a.algorithm, parse_algorithm);
    r.get_parsed<ModelPolicy>("model", a.policy, parse_policy);
    r.get<Index>("M", a.M, at_least<Index>(1));
    double floor = 0.0;
    bool has_floor = r.child("floor").is_number();
    r.get<double>("floor", floor);
    if (has_floor) a.floor = floor;
    r.get<double>("alpha", a.alpha, positive<double>());
    r.get<Index>("batch_size", a.batch_size, at_least<Index>(0));
    Reader s(r.child("step"), "algorithm.step", errors);
    s.get_parsed<StepSizePolicy::Mode>("mode", a.step.mode, parse_step_mode);
    s.get<double>("eta", a.step.eta, open_unit());
    s.get<double>("c", a.step.c, open_unit());
    s.get<double>("gamma_init", a.step.gamma_init, positive<double>());
    s.get<double>("gamma", a.step.gamma, positive<double>());
    s.finish();
    Reader d(r.child("dual"), "algorithm.dual", errors);
    d.get<double>("tol", a.dual.tol, positive<double>());
    d.get<int>("max_iter", a.dual.max_iter, at_least<int>(1));
    d.get_parsed<DualMethod>("method", a.dual.method, parse_dual_method);
    d.get<int>("polish_every", a.dual.polish_every, at_least<int>(0));
    d.finish();
    r.finish();
  }
  {
    Reader r(top.child("asynchrony"), "asynchrony", errors);
    AsyncConfig& a = cfg.async;
    r.get<std::string>("mode", a.mode,
                       [](const std::string& v) { return one_of(v, {"sync", "partial", "total", "threaded"}); });
    r.get<long>("B", a.B, at_least<long>(0));
    r.get<long>("D", a.D, at_least<long>(0));
    r.get_parsed<Growth>("growth", a.growth, parse_growth);
    r.get<double>("wall_seconds", a.wall_seconds, positive<double>());
    r.finish();
  }
  {
    Reader r(top.child("reference"), "reference", errors);
    r.get<double>("tol", cfg.reference_tol, positive<double>());
    r.get<bool>("penalized", cfg.penalized_reference);
    r.get<double>("penalized_tol", cfg.penalized_tol, positive<double>());
    r.finish();
  }
  top.finish();

  // Cross-field checks.
  if (cfg.problem.loss == "quadratic" && cfg.algo.batch_size > 0)
    errors.push_back("algorithm.batch_size: minibatches need the logistic loss");
  if (cfg.problem.loss == "logistic" && cfg.problem.dataset.empty())
    errors.push_back("problem.dataset: required for the logistic loss");
  if (cfg.graph.edge_list.empty() && cfg.graph.nodes < 2) errors.push_back("graph.nodes: must be >= 2");

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("(file): not valid JSON: ") + e.what()});
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  const ProblemConfig& p = c.problem;
  const AlgoConfig& a = c.algo;
  json j;
  j["schema"] = c.schema;
  j["iterations"] = c.iterations;
  j["stride"] = c.stride;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["problem"] = {{"loss", p.loss},
                  {"dataset", p.dataset},
                  {"dim", p.dim},
                  {"samples", p.samples},
                  {"max_samples", p.max_samples},
                  {"labels", p.labels},
                  {"positive_label", p.positive_label},
                  {"normalize", p.normalize},
                  {"data_seed", p.data_seed},
                  {"theta", p.theta},
                  {"curvature", p.curvature},
                  {"regularizer", {{"kind", to_string(p.reg)}, {"lambda", p.lambda}, {"lo", p.lo}, {"hi", p.hi}}}};
  j["graph"] = {{"topology", to_string(c.graph.topology)},
                {"nodes", c.graph.nodes},
                {"edge_probability", c.graph.edge_probability},
                {"edge_list", c.graph.edge_list}};
  j["algorithm"] = {{"name", to_string(a.algorithm)},
                    {"model", to_string(a.policy)},
                    {"M", a.M},
                    {"floor", a.floor ? json(*a.floor) : json(nullptr)},
                    {"alpha", a.alpha},
                    {"batch_size", a.batch_size},
                    {"step",
                     {{"mode", to_string(a.step.mode)},
                      {"eta", a.step.eta},
                      {"c", a.step.c},
                      {"gamma_init", a.step.gamma_init},
                      {"gamma", a.step.gamma}}},
                    {"dual",
                     {{"tol", a.dual.tol},
                      {"max_iter", a.dual.max_iter},
                      {"method", a.dual.method == DualMethod::fista ? "fista" : "adaptive_pg"},
                      {"polish_every", a.dual.polish_every}}}};
  j["asynchrony"] = {{"mode", c.async.mode},
                     {"B", c.async.B},
                     {"D", c.async.D},
                     {"growth", to_string(c.async.growth)},
                     {"wall_seconds", c.async.wall_seconds}};
  j["reference"] = {{"tol", c.reference_tol}, {"penalized", c.penalized_reference}, {"penalized_tol", c.penalized_tol}};
  return j;
}

BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
  BuiltExperiment b;
  const ProblemConfig& p = cfg.problem;

  if (!cfg.graph.edge_list.empty()) {
    b.graph = load_edge_list(cfg.graph.edge_list, 0);
  } else {
    b.graph = build_topology(cfg.graph.topology, cfg.graph.nodes, cfg.graph.edge_probability, cfg.seed);
  }
  const Index n = b.graph.size();
  b.W = metropolis_weights(b.graph);

  Regularizer reg;
  if (p.reg == RegKind::l1) reg = Regularizer::l1(p.lambda);

  if (p.loss == "quadratic") {
    if (p.reg == RegKind::box) reg = Regularizer::box(p.lo, p.hi, p.dim);
    b.problem = make_quadratic_problem(n, p.dim, p.theta, reg, cfg.seed, p.curvature);
    b.dataset_label = "synthetic quadratic";
  } else {
    Dataset data;
    if (p.dataset == "synthetic") {
      data = make_synthetic_logistic(p.samples, p.dim, p.data_seed);
      b.dataset_label = "synthetic logistic";
    } else if (p.dataset == "synthetic_covertype") {
      data = make_synthetic_covertype(p.samples, p.data_seed);
      b.dataset_label = "synthetic covertype-shaped";
    } else {
      if (!fs::exists(p.dataset)) throw std::runtime_error("dataset not found: " + p.dataset);
      const LabelMap labels = p.labels == "signed" ? LabelMap::signed_labels() : LabelMap::one_vs_rest(p.positive_label);
      data = load_dataset(p.dataset, labels);
      b.dataset_label = p.dataset;
    }
    data = subsample(data, p.max_samples, p.data_seed);
    if (p.normalize) normalize_features(data);
    if (p.reg == RegKind::box) reg = Regularizer::box(p.lo, p.hi, data.dim());
    b.problem = make_logistic_problem(data, n, p.theta, reg, cfg.seed);
  }
  b.x0 = Matrix::Zero(b.problem.dim(), n);
  return b;
}

std::string resolve_output_dir(const std::string& output) {
  fs::path out(output);
  if (out.is_relative()) {
    if (const char* root = std::getenv("DPBM_OUTPUT_ROOT"); root != nullptr && *root != '\0') out = fs::path(root) / out;
  }
  return out.string();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts) {
  const auto started = std::chrono::steady_clock::now();
  BuiltExperiment b = build_experiment(cfg);
  ExperimentResult res;

  const ReferenceResult ref = reference_optimum(b.problem, cfg.reference_tol);
  res.f_star = ref.f_star;
  std::optional<PenalizedResult> pen;
  if (cfg.penalized_reference) pen = penalized_optimum(b.problem, b.W, cfg.algo.alpha, cfg.penalized_tol);

  const std::string& mode = cfg.async.mode;
  if (mode == "threaded") {
    ThreadedOptions opts;
    opts.wall_seconds = cfg.async.wall_seconds;
    opts.max_updates = cfg.iterations;
    res.trace = run_threaded(b.problem, b.graph, b.W, cfg.algo, b.x0, cfg.seed, opts);
  } else {
    AsyncSchedule schedule;
    if (mode == "total")
      schedule = schedule_total(b.graph, cfg.iterations, cfg.seed, cfg.async.growth);
    else if (mode == "partial")
      schedule = schedule_partial(b.graph, cfg.iterations, cfg.async.B, cfg.async.D, cfg.seed);
    else
      schedule = schedule_partial(b.graph, cfg.iterations, 0, 0, cfg.seed);
    SimOptions opts;
    opts.stride = cfg.stride;
    res.trace = run_simulation(b.problem, b.graph, b.W, cfg.algo, schedule, b.x0, cfg.seed, opts);
  }

  const auto series = error_series(res.trace, b.problem, res.f_star);
  res.final_error = series.back().value;

  std::vector<MetricRow> rows;
  for (std::size_t t = 0; t < res.trace.snapshots.size(); ++t) {
    const Matrix& X = res.trace.snapshots[t];
    const long k = res.trace.iterations[t];
    rows.push_back({k, -1, "f_error", series[t].value});
    rows.push_back({k, -1, "consensus_error", consensus_error(X)});
    rows.push_back({k, -1, "penalized_objective", penalized_objective(b.problem, b.W, cfg.algo.alpha, X)});
    if (pen) {
      for (Index i = 0; i < X.cols(); ++i)
        rows.push_back({k, i, "dist_penalized_opt", (X.col(i) - pen->X.col(i)).norm()});
    }
  }

  long attempts = 0, dual_iters_max = 0, unconverged = 0;
  double dual_iters_sum = 0.0;
  for (const auto& r : res.trace.log) {
    attempts += r.attempts;
    dual_iters_max = std::max<long>(dual_iters_max, r.dual_iterations);
    dual_iters_sum += r.dual_iterations;
    if (!r.dual_converged) ++unconverged;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json& s = res.summary;
  s["dataset"] = b.dataset_label;
  s["nodes"] = b.problem.nodes();
  s["dim"] = b.problem.dim();
  s["iterations"] = res.trace.iterations.back();
  s["f_star"] = res.f_star;
  s["reference"] = {{"residual", ref.residual}, {"iterations", ref.iterations}, {"tol", cfg.reference_tol}};
  s["final_error"] = res.final_error;
  s["final_consensus_error"] = consensus_error(res.trace.final());
  s["updates"] = res.trace.log.size();
  s["attempts"] = attempts;
  s["dual"] = {{"max_iterations", dual_iters_max},
               {"mean_iterations", res.trace.log.empty() ? 0.0 : dual_iters_sum / double(res.trace.log.size())},
               {"unconverged", unconverged}};
  s["delay"] = {{"max", res.trace.max_delay}, {"mean", res.trace.mean_delay}};
  if (pen) {
    s["penalized"] = {{"residual", pen->residual},
                      {"iterations", pen->iterations},
                      {"final_max_abs_error", max_abs_error(res.trace.final(), pen->X)}};
  }
  s["seed"] = cfg.seed;
  s["elapsed_seconds"] = elapsed;

  if (write_artifacts) {
    res.output_dir = resolve_output_dir(cfg.output);
    fs::create_directories(res.output_dir);
    const fs::path dir(res.output_dir);
    write_metrics_csv((dir / "trace.csv").string(), rows);
    write_trace_binary((dir / "trace.bin").string(), res.trace);
    std::ofstream((dir / "summary.json").string()) << s.dump(2) << '\n';
    std::ofstream((dir / "config.resolved.json").string()) << to_json(cfg).dump(2) << '\n';
  }
  return res;
}

}  // namespace dpbm
