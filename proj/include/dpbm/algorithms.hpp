#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dpbm/bundle.hpp"
#include "dpbm/graph.hpp"
#include "dpbm/problem.hpp"
#include "dpbm/subproblem.hpp"

namespace dpbm {

/// gamma = eta / (beta + (1 - w_ii) / alpha). Takes no schedule information.
double fixed_step(double beta, double w_ii, double alpha, double eta);

/// beta^k from f(x+) = m(x+) + beta^k ||x+ - x||^2 / 2. Returns 0 when the step
/// is (numerically) zero. A minorant violation throws unless `stochastic`, in
/// which case beta^k is clamped at 0.
double compute_beta_k(double f_new, double m_new, double dx_sqnorm, bool stochastic = false);

/// Worst-case number of back-tracking attempts for one update.
int backtracking_attempt_bound(double gamma_init, double beta, double w_ii, double alpha, double eta, double c);

struct StepSizePolicy {
  enum class Mode { fixed, constant, backtracking };
  Mode mode = Mode::fixed;
  double eta = 0.9;
  /// Back-tracking resets the carry to c * eta / (beta_k + (1 - w_ii)/alpha)
  /// after every update, so c also scales the steady-state step.
  double c = 0.9;
  double gamma_init = 1.0;
  /// Used by Mode::constant.
  double gamma = 1.0;

  static StepSizePolicy fixed(double eta);
  static StepSizePolicy constant(double gamma);
  static StepSizePolicy backtracking(double eta, double c, double gamma_init);
  void validate() const;
};

enum class Algorithm { dpbm, prox_dgd };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm a);

struct AlgoConfig {
  Algorithm algorithm = Algorithm::dpbm;
  double alpha = 1.0;
  ModelPolicy policy = ModelPolicy::cutting_plane;
  Index M = 10;
  /// Floor for the Polyak-type models; defaults to the local loss's lower bound.
  std::optional<double> floor;
  StepSizePolicy step;
  /// 0 = deterministic; otherwise minibatch size per update.
  Index batch_size = 0;
  DualOptions dual;

  bool stochastic() const { return batch_size > 0; }
  void validate() const;
};

struct NeighborCopy {
  Index id = 0;
  double weight = 0.0;
  Vector x;
  long version = 0;
};

/// Everything one node owns: iterate, buffered neighbor iterates, model, step state.
struct NodeState {
  Index id = 0;
  Vector x;
  double self_weight = 1.0;
  std::vector<NeighborCopy> neighbors;
  BundleModel model;
  /// Smoothness constant used by the fixed step (L, or 2L per sample when stochastic).
  double beta = 0.0;
  /// Back-tracking carry.
  double gamma_carry = 0.0;
  const LocalObjective* objective = nullptr;
  std::mt19937_64 rng;
  long updates = 0;

  /// sum_j w_ij (x_i - x_ij) over buffered copies.
  Vector penalty_sum() const;
  /// Latest-wins buffer write. Throws if the version tag would go backwards.
  void receive(std::size_t slot, const Vector& value, long version);
};

/// Builds node i with copies of its neighbors' starting points (version 0)
/// and the initial model at x0.col(i).
NodeState make_node(Index id, const Problem& problem, const Graph& graph, const Matrix& W, const AlgoConfig& cfg,
                    const Matrix& x0, std::uint64_t seed);

std::vector<NodeState> make_nodes(const Problem& problem, const Graph& graph, const Matrix& W,
                                  const AlgoConfig& cfg, const Matrix& x0, std::uint64_t seed);

struct UpdateRecord {
  Index node = 0;
  long iteration = 0;
  double gamma = 0.0;
  int attempts = 1;
  double beta_k = 0.0;
  int dual_iterations = 0;
  double dual_residual = 0.0;
  bool dual_converged = true;
};

/// One DPBM update with step gamma: solve the subproblem, then refresh the
/// model with (batch) information at the new iterate.
UpdateRecord dpbm_node_update(NodeState& node, double gamma, const AlgoConfig& cfg, const Regularizer& reg,
                              long iteration);

/// Same update with cuts from a fresh minibatch drawn from the node's generator.
UpdateRecord stochastic_node_update(NodeState& node, double gamma, const AlgoConfig& cfg, const Regularizer& reg,
                                    long iteration);

/// Back-tracking over gamma starting from node.gamma_carry; updates the carry.
UpdateRecord backtracking_update(NodeState& node, const AlgoConfig& cfg, const Regularizer& reg, long iteration);

/// Prox-DGD at one node from its buffered copies:
/// x_i <- prox_{alpha h}(w_ii x_i + sum_j w_ij x_ij - alpha grad f_i(x_i)).
UpdateRecord prox_dgd_node_update(NodeState& node, const AlgoConfig& cfg, const Regularizer& reg, long iteration);

/// Dispatches on cfg (algorithm, step policy, stochastic flag).
UpdateRecord node_update(NodeState& node, const AlgoConfig& cfg, const Regularizer& reg, long iteration);

/// Step the node would use under a fixed/constant policy.
double node_fixed_step(const NodeState& node, const AlgoConfig& cfg);

/// Matrix-form synchronous Prox-DGD step; X holds x_i as columns.
Matrix prox_dgd_step(const Matrix& X, const Matrix& W, double alpha, const Problem& problem);

}  // namespace dpbm
