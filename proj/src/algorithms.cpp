#include "dpbm/algorithms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dpbm {

double fixed_step(double beta, double w_ii, double alpha, double eta) {
  if (!(w_ii > 0.0) || w_ii > 1.0) throw std::invalid_argument("fixed_step: w_ii must lie in (0, 1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("fixed_step: alpha must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("fixed_step: eta must lie in (0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("fixed_step: beta must be >= 0");
  const double denom = beta + (1.0 - w_ii) / alpha;
  if (!(denom > 0.0)) throw std::invalid_argument("fixed_step: beta = 0 with w_ii = 1 leaves the step unbounded");
  return eta / denom;
}

double compute_beta_k(double f_new, double m_new, double dx_sqnorm, bool stochastic) {
  if (!(dx_sqnorm >= 0.0)) throw std::invalid_argument("compute_beta_k: negative step norm");
  if (dx_sqnorm <= 1e-16) return 0.0;
  const double excess = f_new - m_new;
  if (excess < 0.0) {
    if (stochastic) return 0.0;
    if (-excess > 1e-12 * std::max(1.0, std::abs(f_new)))
      throw std::runtime_error("model exceeds f at the new iterate by " + std::to_string(-excess) +
                               "; the model is not a minorant");
    return 0.0;
  }
  return 2.0 * excess / dx_sqnorm;
}

int backtracking_attempt_bound(double gamma_init, double beta, double w_ii, double alpha, double eta, double c) {
  const double ratio = gamma_init * (beta + (1.0 - w_ii) / alpha) / eta;
  if (ratio <= 1.0) return 1;
  return static_cast<int>(std::ceil(std::log(ratio) / std::log(1.0 / c))) + 1;
}

StepSizePolicy StepSizePolicy::fixed(double eta) {
  StepSizePolicy p;
  p.mode = Mode::fixed;
  p.eta = eta;
  p.validate();
  return p;
}

StepSizePolicy StepSizePolicy::constant(double gamma) {
  StepSizePolicy p;
  p.mode = Mode::constant;
  p.gamma = gamma;
  p.validate();
  return p;
}

StepSizePolicy StepSizePolicy::backtracking(double eta, double c, double gamma_init) {
  StepSizePolicy p;
  p.mode = Mode::backtracking;
  p.eta = eta;
  p.c = c;
  p.gamma_init = gamma_init;
  p.validate();
  return p;
}

void StepSizePolicy::validate() const {
  switch (mode) {
    case Mode::constant:
      if (!(gamma > 0.0)) throw std::invalid_argument("constant step must be positive");
      break;
    case Mode::backtracking:
      if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("back-tracking c must lie in (0, 1)");
      if (!(gamma_init > 0.0)) throw std::invalid_argument("back-tracking gamma_init must be positive");
      [[fallthrough]];
    case Mode::fixed:
      if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
      break;
  }
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "dpbm") return Algorithm::dpbm;
  if (name == "prox_dgd") return Algorithm::prox_dgd;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string to_string(Algorithm a) { return a == Algorithm::dpbm ? "dpbm" : "prox_dgd"; }

void AlgoConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  if (batch_size < 0) throw std::invalid_argument("batch size must be >= 0");
  if (!(dual.tol > 0.0)) throw std::invalid_argument("dual tolerance must be positive");
  step.validate();
}

Vector NodeState::penalty_sum() const {
  Vector s = Vector::Zero(x.size());
  for (const auto& nb : neighbors) s += nb.weight * (x - nb.x);
  return s;
}

void NodeState::receive(std::size_t slot, const Vector& value, long version) {
  NeighborCopy& nb = neighbors.at(slot);
  if (version < nb.version)
    throw std::logic_error("node " + std::to_string(id) + ": copy of node " + std::to_string(nb.id) +
                           " would go back from version " + std::to_string(nb.version) + " to " +
                           std::to_string(version));
  nb.x = value;
  nb.version = version;
}

namespace {

std::pair<double, Vector> evaluate(NodeState& node, const Vector& x, const AlgoConfig& cfg) {
  if (!cfg.stochastic()) return node.objective->value_grad(x);
  const Index N = node.objective->sample_count();
  if (cfg.batch_size > N)
    throw std::invalid_argument("batch size " + std::to_string(cfg.batch_size) + " exceeds shard size " +
                                std::to_string(N));
  const Batch batch = sample_batch(N, cfg.batch_size, node.rng);
  return node.objective->value_grad(x, batch);
}

struct Trial {
  Vector x;
  DualResult dual;
};

Trial solve_at(const NodeState& node, double gamma, const AlgoConfig& cfg, const Regularizer& reg) {
  const SubproblemInstance inst = assemble_subproblem(node.model, node.x, node.penalty_sum(), cfg.alpha, gamma, reg);
  Trial t;
  t.dual = solve_dual(inst, cfg.dual);
  t.x = recover_primal(t.dual.v, inst);
  return t;
}

[[noreturn]] void rethrow_with_context(const NodeState& node, long iteration, const std::exception& e) {
  throw std::runtime_error("node " + std::to_string(node.id) + ", iteration " + std::to_string(iteration) + ": " +
                           e.what());
}

UpdateRecord commit(NodeState& node, Trial trial, double gamma, double f_new, Vector grad_new, long iteration) {
  UpdateRecord rec;
  rec.node = node.id;
  rec.iteration = iteration;
  rec.gamma = gamma;
  rec.dual_iterations = trial.dual.iterations;
  rec.dual_residual = trial.dual.residual;
  rec.dual_converged = trial.dual.converged;
  node.model = refresh_model(std::move(node.model), f_new, grad_new, trial.x, iteration + 1);
  node.x = std::move(trial.x);
  ++node.updates;
  return rec;
}

UpdateRecord model_update(NodeState& node, double gamma, const AlgoConfig& cfg, const Regularizer& reg,
                          long iteration) {
  try {
    Trial trial = solve_at(node, gamma, cfg, reg);
    auto [f_new, g_new] = evaluate(node, trial.x, cfg);
    return commit(node, std::move(trial), gamma, f_new, std::move(g_new), iteration);
  } catch (const std::exception& e) {
    rethrow_with_context(node, iteration, e);
  }
}

}  // namespace

NodeState make_node(Index id, const Problem& problem, const Graph& graph, const Matrix& W, const AlgoConfig& cfg,
                    const Matrix& x0, std::uint64_t seed) {
  NodeState node;
  node.id = id;
  node.objective = &problem.locals.at(static_cast<std::size_t>(id));
  node.x = x0.col(id);
  node.self_weight = W(id, id);
  for (Index j : graph.neighbors(id)) node.neighbors.push_back({j, W(id, j), x0.col(j), 0});

  std::seed_seq seq{seed, static_cast<std::uint64_t>(id), std::uint64_t{0x5eed}};
  node.rng.seed(seq);

  node.beta = cfg.stochastic() ? 2.0 * node.objective->sample_smoothness() : node.objective->smoothness();
  node.gamma_carry = cfg.step.gamma_init;

  if (cfg.algorithm == Algorithm::dpbm) {
    std::optional<double> floor;
    if (cfg.policy == ModelPolicy::polyak || cfg.policy == ModelPolicy::polyak_cutting_plane) {
      floor = cfg.floor ? *cfg.floor : node.objective->lower_bound();
      if (!std::isfinite(*floor))
        throw std::invalid_argument("node " + std::to_string(id) + ": no finite floor for the " +
                                    to_string(cfg.policy) + " model");
    }
    auto [f0, g0] = evaluate(node, node.x, cfg);
    node.model = initial_model(cfg.policy, cfg.M, floor, f0, g0, node.x);
  }
  return node;
}

std::vector<NodeState> make_nodes(const Problem& problem, const Graph& graph, const Matrix& W,
                                  const AlgoConfig& cfg, const Matrix& x0, std::uint64_t seed) {
  problem.validate();
  cfg.validate();
  if (graph.size() != problem.nodes() || W.rows() != problem.nodes() || W.cols() != problem.nodes())
    throw std::invalid_argument("graph, weights and problem disagree on the node count");
  if (x0.rows() != problem.dim() || x0.cols() != problem.nodes())
    throw std::invalid_argument("starting point must be d x n");
  std::vector<NodeState> nodes;
  nodes.reserve(static_cast<std::size_t>(problem.nodes()));
  for (Index i = 0; i < problem.nodes(); ++i) nodes.push_back(make_node(i, problem, graph, W, cfg, x0, seed));
  return nodes;
}

UpdateRecord dpbm_node_update(NodeState& node, double gamma, const AlgoConfig& cfg, const Regularizer& reg,
                              long iteration) {
  if (cfg.stochastic()) throw std::invalid_argument("dpbm_node_update: configuration is stochastic");
  return model_update(node, gamma, cfg, reg, iteration);
}

UpdateRecord stochastic_node_update(NodeState& node, double gamma, const AlgoConfig& cfg, const Regularizer& reg,
                                    long iteration) {
  if (!cfg.stochastic()) throw std::invalid_argument("stochastic_node_update: batch size is 0");
  return model_update(node, gamma, cfg, reg, iteration);
}

UpdateRecord backtracking_update(NodeState& node, const AlgoConfig& cfg, const Regularizer& reg, long iteration) {
  const StepSizePolicy& p = cfg.step;
  const double shift = (1.0 - node.self_weight) / cfg.alpha;
  try {
    for (int attempt = 1; attempt <= 1000; ++attempt) {
      const double gamma = node.gamma_carry;
      Trial trial = solve_at(node, gamma, cfg, reg);
      auto [f_new, g_new] = evaluate(node, trial.x, cfg);
      const double m_new = node.model.value(trial.x);
      const double beta_k = compute_beta_k(f_new, m_new, (trial.x - node.x).squaredNorm(), cfg.stochastic());
      node.gamma_carry = p.c * p.eta / (beta_k + shift);
      if (gamma <= p.eta / (beta_k + shift)) {
        UpdateRecord rec = commit(node, std::move(trial), gamma, f_new, std::move(g_new), iteration);
        rec.attempts = attempt;
        rec.beta_k = beta_k;
        return rec;
      }
    }
  } catch (const std::exception& e) {
    rethrow_with_context(node, iteration, e);
  }
  throw std::runtime_error("node " + std::to_string(node.id) + ", iteration " + std::to_string(iteration) +
                           ": back-tracking exceeded 1000 attempts");
}

UpdateRecord prox_dgd_node_update(NodeState& node, const AlgoConfig& cfg, const Regularizer& reg, long iteration) {
  try {
    Vector mixed = node.self_weight * node.x;
    for (const auto& nb : node.neighbors) mixed += nb.weight * nb.x;
    const Vector grad = evaluate(node, node.x, cfg).second;
    node.x = prox(reg, mixed - cfg.alpha * grad, cfg.alpha);
    ++node.updates;
  } catch (const std::exception& e) {
    rethrow_with_context(node, iteration, e);
  }
  UpdateRecord rec;
  rec.node = node.id;
  rec.iteration = iteration;
  rec.gamma = cfg.alpha;
  rec.dual_iterations = 0;
  return rec;
}

double node_fixed_step(const NodeState& node, const AlgoConfig& cfg) {
  switch (cfg.step.mode) {
    case StepSizePolicy::Mode::constant:
      return cfg.step.gamma;
    case StepSizePolicy::Mode::fixed:
      return fixed_step(node.beta, node.self_weight, cfg.alpha, cfg.step.eta);
    case StepSizePolicy::Mode::backtracking:
      break;
  }
  throw std::logic_error("node_fixed_step: back-tracking has no fixed step");
}

UpdateRecord node_update(NodeState& node, const AlgoConfig& cfg, const Regularizer& reg, long iteration) {
  if (cfg.algorithm == Algorithm::prox_dgd) return prox_dgd_node_update(node, cfg, reg, iteration);
  if (cfg.step.mode == StepSizePolicy::Mode::backtracking) return backtracking_update(node, cfg, reg, iteration);
  const double gamma = node_fixed_step(node, cfg);
  return model_update(node, gamma, cfg, reg, iteration);
}

Matrix prox_dgd_step(const Matrix& X, const Matrix& W, double alpha, const Problem& problem) {
  if (X.rows() != problem.dim() || X.cols() != problem.nodes() || W.rows() != X.cols() || W.cols() != X.cols())
    throw std::invalid_argument("prox_dgd_step: dimension mismatch");
  // Columns are nodes, so mixing is X W (W symmetric).
  Matrix out = X * W;
  for (Index i = 0; i < X.cols(); ++i) {
    const Vector grad = problem.locals[static_cast<std::size_t>(i)].gradient(X.col(i));
    out.col(i) = prox(problem.reg, out.col(i) - alpha * grad, alpha);
  }
  return out;
}

}  // namespace dpbm
