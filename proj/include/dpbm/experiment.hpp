#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpbm/algorithms.hpp"
#include "dpbm/async_sim.hpp"
#include "dpbm/graph.hpp"
#include "dpbm/metrics.hpp"
#include "dpbm/problem.hpp"

namespace dpbm {

inline constexpr int kConfigSchema = 1;

struct ProblemConfig {
  std::string loss = "quadratic";  // quadratic | logistic
  /// Logistic data: a LIBSVM/CSV path, "synthetic" or "synthetic_covertype".
  std::string dataset = "synthetic";
  Index dim = 5;
  Index samples = 2000;
  Index max_samples = 10000;
  std::string labels = "one_vs_rest";  // one_vs_rest | signed
  double positive_label = 2.0;
  bool normalize = true;
  std::uint64_t data_seed = 0;
  double theta = 0.0;
  double curvature = 1.0;
  RegKind reg = RegKind::l1;
  double lambda = 1e-3;
  double lo = -1.0;
  double hi = 1.0;
};

struct GraphConfig {
  Topology topology = Topology::ring;
  Index nodes = 10;
  double edge_probability = 0.5;
  std::string edge_list;
};

struct AsyncConfig {
  std::string mode = "sync";  // sync | partial | total | threaded
  long B = 0;
  long D = 0;
  Growth growth = Growth::sqrt;
  double wall_seconds = 2.0;
};

struct ExperimentConfig {
  int schema = kConfigSchema;
  ProblemConfig problem;
  GraphConfig graph;
  AlgoConfig algo;
  AsyncConfig async;
  long iterations = 150;
  long stride = 1;
  std::uint64_t seed = 1;
  std::string output = "results";
  double reference_tol = 1e-10;
  bool penalized_reference = false;
  double penalized_tol = 1e-10;
};

/// Thrown with one message per failing field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// Fully resolved config (every default spelled out); parses back to the same run.
nlohmann::json to_json(const ExperimentConfig& cfg);

struct BuiltExperiment {
  Problem problem;
  Graph graph;
  Matrix W;
  Matrix x0;
  std::string dataset_label;
};

BuiltExperiment build_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
  Trace trace;
  double f_star = 0.0;
  double final_error = 0.0;
  std::string output_dir;
  nlohmann::json summary;
};

/// Output directory after applying DPBM_OUTPUT_ROOT to relative paths.
std::string resolve_output_dir(const std::string& output);

/// Runs the configured experiment; writes trace.csv, trace.bin, summary.json and
/// config.resolved.json when `write_artifacts`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts = true);

}  // namespace dpbm
