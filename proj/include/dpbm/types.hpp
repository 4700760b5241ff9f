#pragma once

#include <Eigen/Dense>

namespace dpbm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Function values and cut intercepts. Cuts taken at nearby points differ by
/// far less than their magnitude, and the bundle subproblem works with those
/// differences.
using Extended = long double;

inline Extended dot_extended(const Vector& a, const Vector& b) {
  Extended s = 0.0L;
  for (Index k = 0; k < a.size(); ++k) s += static_cast<Extended>(a[k]) * b[k];
  return s;
}

}  // namespace dpbm
