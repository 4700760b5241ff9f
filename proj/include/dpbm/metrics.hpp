#pragma once

#include <string>
#include <vector>

#include "dpbm/async_sim.hpp"
#include "dpbm/problem.hpp"

namespace dpbm {

struct ReferenceResult {
  Vector x;
  double f_star = 0.0;
  /// Proximal-gradient residual ||x - prox(x - t grad)|| / t at the returned x.
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Minimizes sum_i (f_i + h) with accelerated proximal gradient (gradient restart).
ReferenceResult reference_optimum(const Problem& problem, double tol = 1e-10, long max_iter = 500000);

struct PenalizedResult {
  /// Columns are the node blocks x_i*.
  Matrix X;
  /// Prox-DGD fixed-point residual max_i ||x_i - [prox_{alpha h}(XW - alpha grad f)]_i||_inf.
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Minimizes sum_i (f_i(x_i) + h(x_i)) + (1/2 alpha) tr(X (I - W) X^T). The stopping
/// certificate is the Prox-DGD fixed-point residual, whose zeros are exactly the optima.
PenalizedResult penalized_optimum(const Problem& problem, const Matrix& W, double alpha, double tol = 1e-12,
                                  long max_iter = 2000000);

/// Prox-DGD fixed-point residual of X.
double prox_dgd_residual(const Problem& problem, const Matrix& W, double alpha, const Matrix& X);

double penalized_objective(const Problem& problem, const Matrix& W, double alpha, const Matrix& X);

Vector average_iterate(const Matrix& X);

/// max_i ||x_i - xbar||.
double consensus_error(const Matrix& X);

/// max_i ||x_i - y_i||^2.
double block_max_sq(const Matrix& X, const Matrix& Y);

/// Largest entrywise deviation max |X - Y|.
double max_abs_error(const Matrix& X, const Matrix& Y);

struct SeriesPoint {
  long iteration = 0;
  double value = 0.0;
};

/// f(xbar(t)) - f*, with f the global objective sum_i (f_i + h).
std::vector<SeriesPoint> error_series(const Trace& trace, const Problem& problem, double f_star);

struct EnvelopeReport {
  bool ok = true;
  long iteration = -1;
  Index node = -1;
  double lhs = 0.0;
  double bound = 0.0;
};

/// ||x_i^k - x_i*||^2 <= rho^floor(k / window) * max_j ||x_j^0 - x_j*||^2 + slack for every
/// snapshot; the first snapshot must be the starting point.
EnvelopeReport rate_envelope_check(const Trace& trace, const Matrix& x_star, double rho, long window,
                                   double slack = 1e-9);

/// V^t = max over ticks in window t of max_i ||x_i^k - x_i*||^2; needs stride-1 snapshots.
std::vector<double> window_lyapunov(const Trace& trace, const Matrix& x_star, long window);

struct MetricRow {
  long iteration = 0;
  Index node = -1;
  std::string metric;
  double value = 0.0;
};

/// Long-format CSV `iter,node,metric,value`; node -1 marks network-wide metrics.
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

}  // namespace dpbm
