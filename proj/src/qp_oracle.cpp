// Interior-point reference solver for the bundle subproblem.
//
// The epigraph form is posed as the convex QP
//   minimize 0.5 z^T P z + c^T z   subject to  A z <= r
// with z = (x, u, y): u bounds |x| for the l1 term, y bounds every cut.
// Mehrotra predictor-corrector on the normal equations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dpbm/subproblem.hpp"

namespace dpbm {
namespace {

struct Qp {
  Matrix P;
  Vector c;
  Matrix A;
  Vector r;
  double constant = 0.0;
};

struct Layout {
  Index d = 0;
  Index u_offset = -1;  // -1 when there is no l1 block
  Index y = 0;
  Index vars = 0;
};

Layout layout_for(const SubproblemInstance& inst) {
  Layout l;
  l.d = inst.dim();
  Index next = l.d;
  if (inst.reg.kind == RegKind::l1) {
    l.u_offset = next;
    next += l.d;
  }
  l.y = next;
  l.vars = next + 1;
  return l;
}

Qp build_qp(const SubproblemInstance& inst, const Layout& l) {
  const Index d = l.d;
  const Index T = inst.pieces();
  std::vector<std::pair<Vector, double>> rows;

  for (Index t = 0; t < T; ++t) {
    Vector a = Vector::Zero(l.vars);
    a.head(d) = inst.slopes.col(t);
    a[l.y] = -1.0;
    rows.emplace_back(std::move(a), -inst.intercepts[t]);
  }
  if (inst.reg.kind == RegKind::l1) {
    for (Index k = 0; k < d; ++k) {
      Vector a = Vector::Zero(l.vars);
      a[k] = 1.0;
      a[l.u_offset + k] = -1.0;
      rows.emplace_back(a, 0.0);
      a[k] = -1.0;
      rows.emplace_back(std::move(a), 0.0);
    }
  } else if (inst.reg.kind == RegKind::box) {
    for (Index k = 0; k < d; ++k) {
      if (std::isfinite(inst.reg.hi[k])) {
        Vector a = Vector::Zero(l.vars);
        a[k] = 1.0;
        rows.emplace_back(std::move(a), inst.reg.hi[k]);
      }
      if (std::isfinite(inst.reg.lo[k])) {
        Vector a = Vector::Zero(l.vars);
        a[k] = -1.0;
        rows.emplace_back(std::move(a), -inst.reg.lo[k]);
      }
    }
  }

  Qp qp;
  qp.P = Matrix::Zero(l.vars, l.vars);
  qp.P.topLeftCorner(d, d).diagonal().setConstant(1.0 / inst.gamma);
  qp.c = Vector::Zero(l.vars);
  qp.c.head(d) = -inst.center / inst.gamma;
  if (l.u_offset >= 0) qp.c.segment(l.u_offset, d).setConstant(inst.reg.lambda);
  qp.c[l.y] = 1.0;
  qp.constant = inst.center.squaredNorm() / (2.0 * inst.gamma);
  qp.A.resize(static_cast<Index>(rows.size()), l.vars);
  qp.r.resize(static_cast<Index>(rows.size()));
  for (Index m = 0; m < static_cast<Index>(rows.size()); ++m) {
    qp.A.row(m) = rows[static_cast<std::size_t>(m)].first.transpose();
    qp.r[m] = rows[static_cast<std::size_t>(m)].second;
  }
  return qp;
}

double max_step(const Vector& v, const Vector& dv) {
  double a = 1.0;
  for (Index k = 0; k < v.size(); ++k)
    if (dv[k] < 0.0) a = std::min(a, -v[k] / dv[k]);
  return a;
}

}  // namespace

OracleResult brute_force_primal(const SubproblemInstance& inst, double tol) {
  inst.validate();
  const Layout l = layout_for(inst);
  const Qp qp = build_qp(inst, l);
  const Index m = qp.A.rows();
  const Index d = l.d;

  Vector z = Vector::Zero(l.vars);
  Vector x0 = inst.center;
  if (inst.reg.kind == RegKind::box) {
    for (Index k = 0; k < d; ++k) {
      const double lo = inst.reg.lo[k], hi = inst.reg.hi[k];
      const double pad = std::isfinite(hi - lo) ? 0.01 * (hi - lo) : 0.0;
      x0[k] = std::clamp(x0[k], lo + pad, hi - pad);
    }
  }
  z.head(d) = x0;
  if (l.u_offset >= 0) z.segment(l.u_offset, d) = x0.cwiseAbs().array() + 1.0;
  z[l.y] = (inst.slopes.transpose() * x0 + inst.intercepts).maxCoeff() + 1.0;

  Vector s = (qp.r - qp.A * z).cwiseMax(1.0);
  Vector lam = Vector::Ones(m);

  // Normal-equation round-off puts a floor near 1e-11 under the dual residual,
  // so feasibility is judged relative to the data scale.
  const double scale = 1.0 + qp.c.lpNorm<Eigen::Infinity>() + qp.r.lpNorm<Eigen::Infinity>();
  const double feas_tol = 1e-10 * scale;

  OracleResult out;
  Vector best_z = z, best_s = s, best_lam = lam;
  double best_merit = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= 200; ++it) {
    const Vector rd = qp.P * z + qp.c + qp.A.transpose() * lam;
    const Vector rp = qp.A * z + s - qp.r;
    const double gap = s.dot(lam);
    out.iterations = it;
    const double merit = std::max({rd.lpNorm<Eigen::Infinity>() / scale, rp.lpNorm<Eigen::Infinity>() / scale, gap});
    if (!std::isfinite(merit)) break;
    if (merit < best_merit) {
      best_merit = merit;
      best_z = z;
      best_s = s;
      best_lam = lam;
    }
    if (rd.lpNorm<Eigen::Infinity>() <= feas_tol && rp.lpNorm<Eigen::Infinity>() <= feas_tol && gap <= tol) {
      out.converged = true;
      break;
    }
    const double mu = gap / static_cast<double>(m);
    const Vector D = lam.cwiseQuotient(s);
    const Matrix H = qp.P + qp.A.transpose() * D.asDiagonal() * qp.A;
    const Eigen::LDLT<Matrix> ldlt(H);

    auto solve = [&](const Vector& rc, Vector& dz, Vector& dl, Vector& ds) {
      const Vector rhs = -rd - qp.A.transpose() * (D.cwiseProduct(rp)) + qp.A.transpose() * rc.cwiseQuotient(s);
      dz = ldlt.solve(rhs);
      dl = D.cwiseProduct(qp.A * dz + rp) - rc.cwiseQuotient(s);
      ds = -rp - qp.A * dz;
    };

    Vector dz, dl, ds;
    solve(s.cwiseProduct(lam), dz, dl, ds);
    const double a_aff = std::min(max_step(s, ds), max_step(lam, dl));
    const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3.0);

    const Vector rc = s.cwiseProduct(lam) + ds.cwiseProduct(dl) - Vector::Constant(m, sigma * mu);
    solve(rc, dz, dl, ds);
    const double a = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(lam, dl)));
    z += a * dz;
    s += a * ds;
    lam += a * dl;
    if (a < 1e-14) break;
  }
  if (!out.converged) {
    z = best_z;
    s = best_s;
    lam = best_lam;
  }

  out.x = z.head(d);
  if (inst.reg.kind == RegKind::box) out.x = out.x.cwiseMax(inst.reg.lo).cwiseMin(inst.reg.hi);
  out.objective = inst.objective(out.x);
  out.gap = s.dot(lam) + (qp.A * z + s - qp.r).lpNorm<Eigen::Infinity>() * lam.lpNorm<1>();
  return out;
}

}  // namespace dpbm
