#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dpbm/types.hpp"

namespace dpbm {

enum class RegKind { zero, l1, box };

/// Proximable regularizer h: zero, lambda*||x||_1, or the indicator of [lo, hi].
struct Regularizer {
  RegKind kind = RegKind::zero;
  double lambda = 0.0;
  Vector lo;
  Vector hi;

  static Regularizer none() { return {}; }

  static Regularizer l1(double weight) {
    if (!(weight >= 0.0)) throw std::invalid_argument("l1 weight must be >= 0");
    Regularizer r;
    r.kind = RegKind::l1;
    r.lambda = weight;
    return r;
  }

  static Regularizer box(Vector lower, Vector upper) {
    if (lower.size() != upper.size()) throw std::invalid_argument("box bounds differ in size");
    if ((lower.array() > upper.array()).any()) throw std::invalid_argument("box bounds need lo <= hi");
    Regularizer r;
    r.kind = RegKind::box;
    r.lo = std::move(lower);
    r.hi = std::move(upper);
    return r;
  }

  static Regularizer box(double lower, double upper, Index dim) {
    return box(Vector::Constant(dim, lower), Vector::Constant(dim, upper));
  }

  void validate(Index dim) const {
    if (kind == RegKind::l1 && !(lambda >= 0.0)) throw std::invalid_argument("l1 weight must be >= 0");
    if (kind == RegKind::box) {
      if (lo.size() != dim || hi.size() != dim) throw std::invalid_argument("box bounds have wrong dimension");
      if ((lo.array() > hi.array()).any()) throw std::invalid_argument("box bounds need lo <= hi");
    }
  }

  template <typename Derived>
  double value(const Eigen::MatrixBase<Derived>& x) const {
    switch (kind) {
      case RegKind::zero:
        return 0.0;
      case RegKind::l1:
        return lambda * x.template lpNorm<1>();
      case RegKind::box:
        if ((x.array() < lo.array()).any() || (x.array() > hi.array()).any())
          return std::numeric_limits<double>::infinity();
        return 0.0;
    }
    return 0.0;
  }
};

inline std::string to_string(RegKind k) {
  switch (k) {
    case RegKind::zero: return "zero";
    case RegKind::l1: return "l1";
    case RegKind::box: return "box";
  }
  return "?";
}

/// Componentwise soft-threshold sign(z) max(|z| - tau, 0).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> soft_threshold(
    const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  return (z.array().sign() * (z.array().abs() - tau).max(Scalar(0))).matrix();
}

/// prox_{t h}(z) = argmin_x h(x) + ||x - z||^2 / (2t).
template <typename Derived>
Vector prox(const Regularizer& reg, const Eigen::MatrixBase<Derived>& z, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("prox: step must be positive");
  switch (reg.kind) {
    case RegKind::zero:
      return z;
    case RegKind::l1:
      return soft_threshold(z, t * reg.lambda);
    case RegKind::box:
      return z.cwiseMax(reg.lo).cwiseMin(reg.hi);
  }
  return z;
}

struct MoreauEval {
  double value = 0.0;
  Vector gradient;
  Vector prox_point;
};

/// Moreau envelope M_{gamma h}(z) together with its gradient (z - prox)/gamma.
template <typename Derived>
MoreauEval moreau_value_grad(const Regularizer& reg, double gamma, const Eigen::MatrixBase<Derived>& z) {
  if (!(gamma > 0.0)) throw std::invalid_argument("moreau envelope: gamma must be positive");
  MoreauEval out;
  out.prox_point = prox(reg, z, gamma);
  const Vector diff = z - out.prox_point;
  // prox_point is feasible for the box, so h(p) is finite.
  const double h = reg.kind == RegKind::box ? 0.0 : reg.value(out.prox_point);
  out.value = h + diff.squaredNorm() / (2.0 * gamma);
  out.gradient = diff / gamma;
  return out;
}

}  // namespace dpbm
