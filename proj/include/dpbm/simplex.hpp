#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dpbm {

/// Euclidean projection onto the unit simplex {v >= 0, sum(v) = 1}.
///
/// Sort-and-threshold: find the largest k with u_k > (sum_{j<=k} u_j - 1) / k
/// on the descending sort, then clip at that threshold.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_simplex(
    const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = u.size();
  if (n == 0) throw std::invalid_argument("project_simplex: empty vector");

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values = u;
  std::vector<Scalar> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());

  Scalar cumsum(0);
  Scalar tau(0);
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += sorted[k];
    const Scalar candidate = (cumsum - Scalar(1)) / Scalar(k + 1);
    if (sorted[k] > candidate) tau = candidate;
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = (values.array() - tau).max(Scalar(0)).matrix();

  // Clean up the rounding residue so that sum(v) = 1 to machine precision.
  const Scalar total = v.sum();
  if (total > Scalar(0)) v /= total;
  return v;
}

}  // namespace dpbm
