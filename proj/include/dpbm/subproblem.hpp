#pragma once

#include <optional>

#include "dpbm/bundle.hpp"
#include "dpbm/regularizer.hpp"
#include "dpbm/simplex.hpp"
#include "dpbm/types.hpp"

namespace dpbm {

/// minimize_x  max_t (g_t^T x + b_t) + h(x) + ||x - center||^2 / (2 gamma)
///
/// `slopes` holds g_t as columns (d x T), `intercepts` holds b_t.
struct SubproblemInstance {
  Matrix slopes;
  Vector intercepts;
  Vector center;
  double gamma = 1.0;
  Regularizer reg;

  Index pieces() const { return intercepts.size(); }
  Index dim() const { return center.size(); }
  void validate() const;

  /// Primal objective at x (+inf outside a box).
  double objective(const Vector& x) const;
};

/// Builds the instance for one node. `penalty_sum` is sum_j w_ij (x_i - x_ij)
/// over the neighbors; the center is x_i - (gamma/alpha) * penalty_sum. The
/// newest cut's slope is folded into the center and its intercept dropped, so
/// the instance matches the node's subproblem up to an additive constant and
/// has the same minimizer.
SubproblemInstance assemble_subproblem(const BundleModel& model, const Vector& x_self, const Vector& penalty_sum,
                                       double alpha, double gamma, const Regularizer& reg);

struct DualEval {
  double value = 0.0;
  Vector gradient;
  /// prox_{gamma h}(center - gamma G v), the primal point paired with v.
  Vector primal;
};

/// Concave dual of the epigraph form over the unit simplex:
///   q(v) = b^T v + M_{gamma h}(c - gamma G v) + (||c||^2 - ||c - gamma G v||^2) / (2 gamma)
/// with gradient b + G^T prox_{gamma h}(c - gamma G v).
DualEval dual_objective(const Vector& v, const SubproblemInstance& inst);

enum class DualMethod { fista, adaptive_pg };

struct DualOptions {
  double tol = 1e-10;
  int max_iter = 5000;
  DualMethod method = DualMethod::fista;
  /// FISTA tries an exact solve on the current active face every this many
  /// iterations (0 = never).
  int polish_every = 20;
};

struct DualResult {
  Vector v;
  int iterations = 0;
  /// Gradient-mapping residual L * ||P(v + grad q(v) / L) - v||_inf at the returned v.
  double residual = 0.0;
  bool converged = false;
};

/// Lipschitz constant gamma * ||G||_2^2 of grad q.
double dual_lipschitz(const SubproblemInstance& inst);

/// Gradient-mapping residual of v for step 1/L.
double dual_residual(const Vector& v, const SubproblemInstance& inst, double lipschitz);

/// Maximizes q over the simplex. Hitting max_iter is reported via
/// `converged = false`, not thrown. `warm_start` is padded/truncated to T.
DualResult solve_dual(const SubproblemInstance& inst, const DualOptions& opts = {},
                      const std::optional<Vector>& warm_start = std::nullopt);

/// x = prox_{gamma h}(center - gamma G v).
Vector recover_primal(const Vector& v, const SubproblemInstance& inst);

struct SubproblemSolution {
  Vector x;
  DualResult dual;
};

SubproblemSolution solve_subproblem(const SubproblemInstance& inst, const DualOptions& opts = {});

struct OracleResult {
  Vector x;
  double objective = 0.0;
  /// Certified bound on objective(x) - optimum.
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Independent primal oracle: interior-point solve of the epigraph QP
/// (l1 split into +-x <= u, box as bounds). Never touches the dual route.
OracleResult brute_force_primal(const SubproblemInstance& inst, double tol = 1e-12);

}  // namespace dpbm
