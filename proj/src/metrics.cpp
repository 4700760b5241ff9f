#include "dpbm/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace dpbm {

namespace {

Vector smooth_gradient(const Problem& problem, const Vector& x) {
  Vector g = Vector::Zero(x.size());
  for (const auto& f : problem.locals) g += f.gradient(x);
  return g;
}

Matrix stacked_gradient(const Problem& problem, const Matrix& X) {
  Matrix G(X.rows(), X.cols());
  for (Index i = 0; i < X.cols(); ++i) G.col(i) = problem.locals[static_cast<std::size_t>(i)].gradient(X.col(i));
  return G;
}

Matrix prox_columns(const Regularizer& reg, const Matrix& Z, double t) {
  Matrix out(Z.rows(), Z.cols());
  for (Index i = 0; i < Z.cols(); ++i) out.col(i) = prox(reg, Z.col(i), t);
  return out;
}

}  // namespace

ReferenceResult reference_optimum(const Problem& problem, double tol, long max_iter) {
  problem.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("reference_optimum: tol must be positive");
  const double n = static_cast<double>(problem.nodes());
  const double L = problem.total_smoothness();
  if (!(L > 0.0)) throw std::invalid_argument("reference_optimum: smoothness constant must be positive");
  const double t = 1.0 / L;
  auto step = [&](const Vector& y) { return prox(problem.reg, y - t * smooth_gradient(problem, y), t * n); };
  auto residual = [&](const Vector& x) { return (x - step(x)).norm() / t; };

  ReferenceResult res;
  Vector x = Vector::Zero(problem.dim());
  Vector y = x;
  double theta = 1.0;
  for (long it = 1; it <= max_iter; ++it) {
    Vector x_next = step(y);
    const double mapping = (y - x_next).norm() / t;
    if ((y - x_next).dot(x_next - x) > 0.0) {
      theta = 1.0;
      y = x_next;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      y = x_next + ((theta - 1.0) / theta_next) * (x_next - x);
      theta = theta_next;
    }
    x = std::move(x_next);
    res.iterations = it;
    if (mapping <= tol) {
      res.residual = residual(x);
      if (res.residual <= tol) {
        res.converged = true;
        break;
      }
    }
  }
  if (!res.converged) {
    res.residual = residual(x);
    throw std::runtime_error("reference_optimum: no convergence after " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(res.residual) + ")");
  }
  res.f_star = problem.global_value(x);
  res.x = std::move(x);
  return res;
}

double prox_dgd_residual(const Problem& problem, const Matrix& W, double alpha, const Matrix& X) {
  const Matrix next = prox_columns(problem.reg, X * W - alpha * stacked_gradient(problem, X), alpha);
  return (X - next).lpNorm<Eigen::Infinity>();
}

PenalizedResult penalized_optimum(const Problem& problem, const Matrix& W, double alpha, double tol, long max_iter) {
  problem.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("penalized_optimum: tol must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("penalized_optimum: alpha must be positive");
  const Index n = problem.nodes();
  const Matrix Lap = Matrix::Identity(n, n) - W;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Lap, Eigen::EigenvaluesOnly);
  double Lf = 0.0;
  for (const auto& f : problem.locals) Lf = std::max(Lf, f.smoothness());
  const double L = Lf + std::max(0.0, eig.eigenvalues().maxCoeff()) / alpha;
  if (!(L > 0.0)) throw std::invalid_argument("penalized_optimum: smoothness constant must be positive");
  const double t = 1.0 / L;

  auto step = [&](const Matrix& Y) {
    const Matrix grad = stacked_gradient(problem, Y) + (Y * Lap) / alpha;
    return prox_columns(problem.reg, Y - t * grad, t);
  };

  PenalizedResult res;
  Matrix X = Matrix::Zero(problem.dim(), n);
  Matrix Y = X;
  double theta = 1.0;
  for (long it = 1; it <= max_iter; ++it) {
    Matrix X_next = step(Y);
    if ((Y - X_next).cwiseProduct(X_next - X).sum() > 0.0) {
      theta = 1.0;
      Y = X_next;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      Y = X_next + ((theta - 1.0) / theta_next) * (X_next - X);
      theta = theta_next;
    }
    X = std::move(X_next);
    res.iterations = it;
    if (it % 10 == 0) {
      res.residual = prox_dgd_residual(problem, W, alpha, X);
      if (res.residual <= tol) {
        res.converged = true;
        break;
      }
    }
  }
  if (!res.converged)
    throw std::runtime_error("penalized_optimum: no convergence after " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(res.residual) + ")");
  res.X = std::move(X);
  return res;
}

double penalized_objective(const Problem& problem, const Matrix& W, double alpha, const Matrix& X) {
  double total = 0.0;
  for (Index i = 0; i < X.cols(); ++i)
    total += problem.locals[static_cast<std::size_t>(i)].value(X.col(i)) + problem.reg.value(X.col(i));
  const Matrix Lap = Matrix::Identity(X.cols(), X.cols()) - W;
  return total + (X * Lap).cwiseProduct(X).sum() / (2.0 * alpha);
}

Vector average_iterate(const Matrix& X) { return X.rowwise().mean(); }

double consensus_error(const Matrix& X) {
  const Vector xbar = average_iterate(X);
  return (X.colwise() - xbar).colwise().norm().maxCoeff();
}

double block_max_sq(const Matrix& X, const Matrix& Y) { return (X - Y).colwise().squaredNorm().maxCoeff(); }

double max_abs_error(const Matrix& X, const Matrix& Y) { return (X - Y).lpNorm<Eigen::Infinity>(); }

std::vector<SeriesPoint> error_series(const Trace& trace, const Problem& problem, double f_star) {
  std::vector<SeriesPoint> out;
  out.reserve(trace.snapshots.size());
  for (std::size_t t = 0; t < trace.snapshots.size(); ++t)
    out.push_back({trace.iterations[t], problem.global_value(average_iterate(trace.snapshots[t])) - f_star});
  return out;
}

EnvelopeReport rate_envelope_check(const Trace& trace, const Matrix& x_star, double rho, long window, double slack) {
  if (window < 1) throw std::invalid_argument("rate_envelope_check: window must be >= 1");
  if (trace.snapshots.empty() || trace.iterations.front() != 0)
    throw std::invalid_argument("rate_envelope_check: trace must start at iteration 0");
  const double d0 = block_max_sq(trace.snapshots.front(), x_star);
  EnvelopeReport rep;
  for (std::size_t t = 0; t < trace.snapshots.size(); ++t) {
    const long k = trace.iterations[t];
    const double bound = std::pow(rho, static_cast<double>(k / window)) * d0 + slack;
    const Vector dist = (trace.snapshots[t] - x_star).colwise().squaredNorm();
    for (Index i = 0; i < dist.size(); ++i) {
      if (!(dist[i] <= bound)) return {false, k, i, dist[i], bound};
    }
  }
  return rep;
}

std::vector<double> window_lyapunov(const Trace& trace, const Matrix& x_star, long window) {
  if (window < 1) throw std::invalid_argument("window_lyapunov: window must be >= 1");
  std::vector<double> V;
  for (std::size_t t = 0; t < trace.snapshots.size(); ++t) {
    if (trace.iterations[t] != static_cast<long>(t))
      throw std::invalid_argument("window_lyapunov: needs one snapshot per tick");
  }
  const long full = static_cast<long>(trace.snapshots.size()) / window;
  for (long w = 0; w < full; ++w) {
    double v = 0.0;
    for (long k = w * window; k < (w + 1) * window; ++k)
      v = std::max(v, block_max_sq(trace.snapshots[static_cast<std::size_t>(k)], x_star));
    V.push_back(v);
  }
  return V;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iter,node,metric,value\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.iteration << ',' << r.node << ',' << r.metric << ',' << r.value << '\n';
  if (!out) throw std::runtime_error("error while writing " + path);
}

}  // namespace dpbm
