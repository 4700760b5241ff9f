#pragma once

#include <deque>
#include <optional>
#include <string>
#include <utility>

#include "dpbm/types.hpp"

namespace dpbm {

/// Affine piece x -> slope^T x + intercept, built at iteration `origin`.
struct Cut {
  Vector slope;
  Extended intercept = 0.0L;
  long origin = 0;

  Extended exact_value(const Vector& x) const { return dot_extended(slope, x) + intercept; }
  double value(const Vector& x) const { return static_cast<double>(exact_value(x)); }

  /// Tangent f(x0) + <g, x - x0>, stored in absolute form.
  static Cut linearization(Extended f_val, const Vector& grad, const Vector& x0, long origin);
};

enum class ModelPolicy { polyak, cutting_plane, polyak_cutting_plane, two_cut };

ModelPolicy parse_policy(const std::string& name);
std::string to_string(ModelPolicy p);

/// Piecewise-linear minorant: max over retained cuts and an optional floor.
///
/// Invariants by policy:
///   polyak                 1 cut + floor
///   cutting_plane(M)       1..M cuts, newest always present, no floor
///   polyak_cutting_plane   as cutting_plane, plus floor
///   two_cut                at most 2 cuts, no floor
class BundleModel {
 public:
  BundleModel() = default;
  BundleModel(ModelPolicy policy, Index capacity, std::optional<double> floor = std::nullopt);

  ModelPolicy policy() const { return policy_; }
  Index capacity() const { return capacity_; }
  const std::deque<Cut>& cuts() const { return cuts_; }
  const std::optional<double>& floor() const { return floor_; }
  bool empty() const { return cuts_.empty() && !floor_; }
  /// Number of affine pieces handed to the subproblem (floor counts as one).
  Index pieces() const { return static_cast<Index>(cuts_.size()) + (floor_ ? 1 : 0); }

  double value(const Vector& x) const { return static_cast<double>(exact_value(x)); }
  Extended exact_value(const Vector& x) const;
  /// Slope of an active piece: lowest-index cut attaining the max, the floor
  /// only when it is strictly above every cut (zero slope).
  Vector subgradient(const Vector& x) const;

  /// Slopes as columns (floor last, zero slope) and matching intercepts.
  std::pair<Matrix, Vector> stacked() const;

  /// Appends a cut and evicts the oldest beyond capacity.
  void push(Cut cut);
  void clear_cuts() { cuts_.clear(); }
  void set_floor(std::optional<double> floor) { floor_ = floor; }

  /// Throws std::logic_error when the policy invariants are broken.
  void check_invariants() const;

 private:
  ModelPolicy policy_ = ModelPolicy::cutting_plane;
  Index capacity_ = 1;
  std::deque<Cut> cuts_;
  std::optional<double> floor_;
};

/// m(x) = max{ f(x_k) + <g, x - x_k>, floor }. Throws when floor > f_val.
BundleModel update_polyak(Extended f_val, const Vector& grad, const Vector& x_k, double floor, long origin = 0);

/// Appends the tangent at x_k with FIFO eviction beyond M cuts.
BundleModel update_cutting_plane(BundleModel model, Extended f_val, const Vector& grad, const Vector& x_k,
                                 long origin = 0);

/// max{ m(x+) + <s, x - x+>, f(x+) + <grad f(x+), x - x+> } with s in dm(x+).
BundleModel update_two_cut(const BundleModel& model, const Vector& x_next, Extended f_next, const Vector& grad_next,
                           long origin = 0);

/// Model m^0 built at the starting point.
BundleModel initial_model(ModelPolicy policy, Index capacity, std::optional<double> floor, Extended f_val,
                          const Vector& grad, const Vector& x0);

/// Dispatches to the policy's update rule with (value, gradient) at the new iterate.
BundleModel refresh_model(BundleModel model, Extended f_val, const Vector& grad, const Vector& x_new, long origin);

}  // namespace dpbm
