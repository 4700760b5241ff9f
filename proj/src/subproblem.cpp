#include "dpbm/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpbm {

void SubproblemInstance::validate() const {
  if (pieces() < 1) throw std::invalid_argument("subproblem: needs at least one affine piece");
  if (slopes.cols() != pieces()) throw std::invalid_argument("subproblem: slopes/intercepts count mismatch");
  if (slopes.rows() != dim()) throw std::invalid_argument("subproblem: slope dimension mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("subproblem: gamma must be positive");
  reg.validate(dim());
}

double SubproblemInstance::objective(const Vector& x) const {
  const double model = (slopes.transpose() * x + intercepts).maxCoeff();
  return model + reg.value(x) + (x - center).squaredNorm() / (2.0 * gamma);
}

SubproblemInstance assemble_subproblem(const BundleModel& model, const Vector& x_self, const Vector& penalty_sum,
                                       double alpha, double gamma, const Regularizer& reg) {
  if (model.empty()) throw std::logic_error("assemble_subproblem: empty model");
  if (!(alpha > 0.0)) throw std::invalid_argument("assemble_subproblem: alpha must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("assemble_subproblem: gamma must be positive");
  const Index d = x_self.size();
  for (const Cut& c : model.cuts())
    if (c.slope.size() != d) throw std::invalid_argument("assemble_subproblem: model/iterate dimension mismatch");

  // Pieces are taken relative to the newest cut (g_r, b_r): g_r^T x joins the
  // quadratic and b_r is dropped. The remaining slopes and intercepts are
  // differences between nearby cuts, small numbers that double precision
  // holds accurately; the absolute ones are not.
  const Vector g_ref = model.cuts().empty() ? Vector::Zero(d) : model.cuts().back().slope;
  const Extended b_ref = model.cuts().empty() ? 0.0L : model.cuts().back().intercept;
  const Index T = model.pieces();
  SubproblemInstance inst;
  inst.slopes.resize(d, T);
  inst.intercepts.resize(T);
  Index t = 0;
  for (const Cut& c : model.cuts()) {
    inst.slopes.col(t) = c.slope - g_ref;
    inst.intercepts[t] = static_cast<double>(c.intercept - b_ref);
    ++t;
  }
  if (model.floor()) {
    inst.slopes.col(t) = -g_ref;
    inst.intercepts[t] = static_cast<double>(*model.floor() - b_ref);
  }
  inst.center = x_self - (gamma / alpha) * penalty_sum - gamma * g_ref;
  inst.gamma = gamma;
  inst.reg = reg;
  return inst;
}

DualEval dual_objective(const Vector& v, const SubproblemInstance& inst) {
  if (v.size() != inst.pieces()) throw std::invalid_argument("dual_objective: v has wrong length");
  const double g = inst.gamma;
  const Vector z = inst.center - g * (inst.slopes * v);
  MoreauEval env = moreau_value_grad(inst.reg, g, z);
  DualEval out;
  out.value = inst.intercepts.dot(v) + env.value + (inst.center.squaredNorm() - z.squaredNorm()) / (2.0 * g);
  out.gradient = inst.intercepts + inst.slopes.transpose() * env.prox_point;
  out.primal = std::move(env.prox_point);
  return out;
}

double dual_lipschitz(const SubproblemInstance& inst) {
  const Matrix gram = inst.slopes.transpose() * inst.slopes;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return inst.gamma * std::max(0.0, eig.eigenvalues().maxCoeff());
}

double dual_residual(const Vector& v, const SubproblemInstance& inst, double lipschitz) {
  const DualEval e = dual_objective(v, inst);
  const Vector stepped = project_simplex(v + e.gradient / lipschitz);
  return lipschitz * (stepped - v).lpNorm<Eigen::Infinity>();
}

namespace {

// Rounding noise in the dual gradient b_t + g_t^T x(v). A requested tolerance
// below this cannot be certified, so convergence tests use the larger of the two.
double tolerance_floor(const Vector& v, const SubproblemInstance& inst, double tol) {
  const Vector x = recover_primal(v, inst);
  const Vector z = inst.center.cwiseAbs() + inst.gamma * (inst.slopes.cwiseAbs() * v.cwiseAbs());
  const Vector scale = inst.intercepts.cwiseAbs() + inst.slopes.cwiseAbs().transpose() * (x.cwiseAbs() + z);
  return std::max(tol, 256.0 * std::numeric_limits<double>::epsilon() * scale.maxCoeff());
}

Vector starting_point(Index T, const std::optional<Vector>& warm) {
  if (!warm || warm->size() == 0) return Vector::Constant(T, 1.0 / static_cast<double>(T));
  Vector v = Vector::Zero(T);
  const Index keep = std::min(T, warm->size());
  v.head(keep) = warm->head(keep);
  return project_simplex(v);
}

// The gradient mapping at the extrapolated point is cheap; confirm at the
// returned iterate before declaring convergence.
bool confirm(const Vector& v, const SubproblemInstance& inst, double L, double tol, double& residual) {
  residual = dual_residual(v, inst, L);
  return residual <= tolerance_floor(v, inst, tol);
}

// Active-set polish. On the face spanned by the support S of v, with the prox
// pattern of z = c - gamma G v held fixed, x(v) is affine in v and
// stationarity reads
//   gamma G_F^T G_F v + mu 1 = r,  1^T v = 1,
// with r_t = b_t + g_{t,F}^T (c_F - gamma lambda s_F) + g_{t,Z}^T x_Z. Nearly
// collinear cuts make the dual flat, so first-order iterates stall long before
// the primal point is accurate; this solve is exact once the face is right.
// Negative weights leave S, the most violated piece outside S joins it, and
// the prox pattern is refreshed from each candidate. The target is the KKT
// condition itself, every support piece attaining the largest dual gradient
// to within rounding: when the cuts nearly coincide L is tiny and the
// L-scaled residual passes at points far from optimal. Failing that, the best
// candidate is returned if it passes the requested tolerance.
std::optional<Vector> polish(const Vector& v0, const SubproblemInstance& inst, double L, double tol) {
  const Index T = inst.pieces(), d = inst.dim();
  const double g = inst.gamma;
  Vector v = v0;
  std::optional<Vector> best_cand;
  double best_res = std::numeric_limits<double>::infinity();
  auto fallback = [&]() -> std::optional<Vector> {
    if (best_cand && best_res <= tolerance_floor(*best_cand, inst, tol)) return best_cand;
    return std::nullopt;
  };
  std::vector<Index> support;
  for (Index t = 0; t < T; ++t)
    if (v[t] > 0.0) support.push_back(t);

  for (Index round = 0; round < 4 * T + 4 && !support.empty(); ++round) {
    const Vector z = inst.center - g * (inst.slopes * v);
    std::vector<Index> free;
    Vector base = Vector::Zero(d);
    for (Index k = 0; k < d; ++k) {
      switch (inst.reg.kind) {
        case RegKind::zero:
          free.push_back(k);
          base[k] = inst.center[k];
          break;
        case RegKind::l1:
          if (std::abs(z[k]) > g * inst.reg.lambda) {
            free.push_back(k);
            base[k] = inst.center[k] - (z[k] > 0.0 ? g * inst.reg.lambda : -g * inst.reg.lambda);
          }
          break;
        case RegKind::box:
          if (z[k] <= inst.reg.lo[k]) {
            base[k] = inst.reg.lo[k];
          } else if (z[k] >= inst.reg.hi[k]) {
            base[k] = inst.reg.hi[k];
          } else {
            free.push_back(k);
            base[k] = inst.center[k];
          }
          break;
      }
    }

    const auto A = static_cast<Index>(support.size());
    Matrix GF(static_cast<Index>(free.size()), A);
    Vector r(A);
    for (Index a = 0; a < A; ++a) {
      const Index t = support[static_cast<std::size_t>(a)];
      for (std::size_t f = 0; f < free.size(); ++f) GF(static_cast<Index>(f), a) = inst.slopes(free[f], t);
      r[a] = inst.intercepts[t] + inst.slopes.col(t).dot(base);
    }
    // Scaled by s so that the rank decision sees the Gram block next to the
    // unit border; the unknowns are (v, mu / s).
    Matrix K = Matrix::Zero(A + 1, A + 1);
    K.topLeftCorner(A, A) = g * (GF.transpose() * GF);
    double s = K.topLeftCorner(A, A).cwiseAbs().maxCoeff();
    if (!(s > 0.0)) s = 1.0;
    K.topLeftCorner(A, A) /= s;
    K.col(A).head(A).setOnes();
    K.row(A).head(A).setOnes();
    Vector rhs(A + 1);
    rhs << r / s, 1.0;
    const Vector sol = K.completeOrthogonalDecomposition().solve(rhs);
    if (!sol.allFinite()) return fallback();

    Index worst = 0;
    for (Index a = 1; a < A; ++a)
      if (sol[a] < sol[worst]) worst = a;
    if (sol[worst] < -1e-14) {
      support.erase(support.begin() + worst);
      continue;
    }
    Vector cand = Vector::Zero(T);
    for (Index a = 0; a < A; ++a) cand[support[static_cast<std::size_t>(a)]] = std::max(0.0, sol[a]);
    if (!(cand.sum() > 0.0)) return fallback();
    cand /= cand.sum();
    const double floor = tolerance_floor(cand, inst, 0.0);
    const Vector grad = dual_objective(cand, inst).gradient;
    double level = -std::numeric_limits<double>::infinity(), spread = 0.0;
    for (Index t = 0; t < T; ++t) level = std::max(level, grad[t]);
    for (Index t = 0; t < T; ++t)
      if (cand[t] > 0.0) spread = std::max(spread, level - grad[t]);
    if (spread <= floor) return cand;
    const double res = dual_residual(cand, inst, L);
    if (res < best_res) {
      best_res = res;
      best_cand = cand;
    }

    // Most violated piece outside the support.
    level = -std::numeric_limits<double>::infinity();
    for (Index t = 0; t < T; ++t)
      if (cand[t] > 0.0) level = std::max(level, grad[t]);
    Index enter = -1;
    double best = floor;
    for (Index t = 0; t < T; ++t)
      if (cand[t] == 0.0 && grad[t] - level > best) {
        best = grad[t] - level;
        enter = t;
      }
    const bool moved = (cand - v).lpNorm<Eigen::Infinity>() > 0.0;
    v = std::move(cand);
    support.clear();
    for (Index t = 0; t < T; ++t)
      if (v[t] > 0.0 || t == enter) support.push_back(t);
    if (enter < 0 && !moved) return fallback();
  }
  return fallback();
}

DualResult fista(const SubproblemInstance& inst, const DualOptions& opts, Vector v, double L) {
  DualResult res;
  Vector y = v;
  double t = 1.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const DualEval e = dual_objective(y, inst);
    Vector v_next = project_simplex(y + e.gradient / L);
    const double mapping = L * (v_next - y).lpNorm<Eigen::Infinity>();

    // Gradient restart: drop momentum when the step opposes the ascent direction.
    const bool restart = (y - v_next).dot(v_next - v) > 0.0;
    if (restart) {
      t = 1.0;
      y = v_next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = v_next + ((t - 1.0) / t_next) * (v_next - v);
      t = t_next;
    }
    v = std::move(v_next);
    res.iterations = it;
    if ((mapping <= opts.tol || mapping <= tolerance_floor(v, inst, opts.tol)) && confirm(v, inst, L, opts.tol, res.residual)) {
      res.converged = true;
      // The residual bounds the primal error only by about sqrt(gamma * tol);
      // the face solve removes that slack.
      if (opts.polish_every > 0) {
        if (auto p = polish(v, inst, L, opts.tol)) {
          v = std::move(*p);
          res.residual = dual_residual(v, inst, L);
        }
      }
      break;
    }
    if (opts.polish_every > 0 && it % opts.polish_every == 0) {
      if (auto p = polish(v, inst, L, opts.tol)) {
        v = std::move(*p);
        res.residual = dual_residual(v, inst, L);
        res.converged = true;
        break;
      }
    }
  }
  if (!res.converged) res.residual = dual_residual(v, inst, L);
  res.v = std::move(v);
  return res;
}

// Adaptive projected gradient with step sizes from local curvature estimates.
DualResult adaptive_pg(const SubproblemInstance& inst, const DualOptions& opts, Vector v, double L) {
  DualResult res;
  double step = 1.0 / L;
  double ratio = std::numeric_limits<double>::infinity();
  Vector grad = dual_objective(v, inst).gradient;
  for (int it = 1; it <= opts.max_iter; ++it) {
    Vector v_next = project_simplex(v + step * grad);
    Vector grad_next = dual_objective(v_next, inst).gradient;
    const double dv = (v_next - v).norm();
    const double dg = (grad_next - grad).norm();
    double next_step = std::sqrt(1.0 + ratio) * step;
    if (dg > 0.0) next_step = std::min(next_step, dv / (2.0 * dg));
    if (!std::isfinite(next_step) || next_step <= 0.0) next_step = 1.0 / L;
    ratio = next_step / step;
    step = next_step;
    v = std::move(v_next);
    grad = std::move(grad_next);
    res.iterations = it;
    const Vector stepped = project_simplex(v + grad / L);
    res.residual = L * (stepped - v).lpNorm<Eigen::Infinity>();
    if (res.residual <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.v = std::move(v);
  return res;
}

}  // namespace

DualResult solve_dual(const SubproblemInstance& inst, const DualOptions& opts, const std::optional<Vector>& warm_start) {
  inst.validate();
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve_dual: tol must be positive");
  const Index T = inst.pieces();
  // A flat dual (all slopes zero) is linear; any large step lands on the best vertex.
  const double L = std::max(dual_lipschitz(inst), 1e-12);
  Vector v = starting_point(T, warm_start);
  return opts.method == DualMethod::fista ? fista(inst, opts, std::move(v), L)
                                          : adaptive_pg(inst, opts, std::move(v), L);
}

Vector recover_primal(const Vector& v, const SubproblemInstance& inst) {
  return prox(inst.reg, inst.center - inst.gamma * (inst.slopes * v), inst.gamma);
}

SubproblemSolution solve_subproblem(const SubproblemInstance& inst, const DualOptions& opts) {
  SubproblemSolution sol;
  sol.dual = solve_dual(inst, opts);
  sol.x = recover_primal(sol.dual.v, inst);
  return sol;
}

}  // namespace dpbm
