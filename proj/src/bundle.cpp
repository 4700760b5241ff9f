#include "dpbm/bundle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpbm {

Cut Cut::linearization(Extended f_val, const Vector& grad, const Vector& x0, long origin) {
  if (grad.size() != x0.size()) throw std::invalid_argument("cut: gradient/point dimension mismatch");
  if (!std::isfinite(f_val) || !grad.allFinite()) throw std::invalid_argument("cut: non-finite value or gradient");
  return Cut{grad, f_val - dot_extended(grad, x0), origin};
}

ModelPolicy parse_policy(const std::string& name) {
  if (name == "polyak") return ModelPolicy::polyak;
  if (name == "cutting_plane" || name == "cp") return ModelPolicy::cutting_plane;
  if (name == "polyak_cutting_plane" || name == "pcp") return ModelPolicy::polyak_cutting_plane;
  if (name == "two_cut") return ModelPolicy::two_cut;
  throw std::invalid_argument("unknown model policy '" + name + "'");
}

std::string to_string(ModelPolicy p) {
  switch (p) {
    case ModelPolicy::polyak: return "polyak";
    case ModelPolicy::cutting_plane: return "cutting_plane";
    case ModelPolicy::polyak_cutting_plane: return "polyak_cutting_plane";
    case ModelPolicy::two_cut: return "two_cut";
  }
  return "?";
}

BundleModel::BundleModel(ModelPolicy policy, Index capacity, std::optional<double> floor)
    : policy_(policy), capacity_(capacity), floor_(floor) {
  switch (policy) {
    case ModelPolicy::polyak:
      capacity_ = 1;
      break;
    case ModelPolicy::two_cut:
      capacity_ = 2;
      break;
    case ModelPolicy::cutting_plane:
    case ModelPolicy::polyak_cutting_plane:
      if (capacity < 1) throw std::invalid_argument("cutting-plane window M must be >= 1");
      break;
  }
  const bool wants_floor = policy == ModelPolicy::polyak || policy == ModelPolicy::polyak_cutting_plane;
  if (wants_floor && !floor_) throw std::invalid_argument(to_string(policy) + " model needs a floor");
  if (!wants_floor && floor_) throw std::invalid_argument(to_string(policy) + " model takes no floor");
  if (floor_ && !std::isfinite(*floor_)) throw std::invalid_argument("model floor must be finite");
}

Extended BundleModel::exact_value(const Vector& x) const {
  if (empty()) throw std::logic_error("model_value: empty model");
  Extended best = floor_ ? *floor_ : -std::numeric_limits<Extended>::infinity();
  for (const auto& c : cuts_) best = std::max(best, c.exact_value(x));
  return best;
}

Vector BundleModel::subgradient(const Vector& x) const {
  if (empty()) throw std::logic_error("model_subgradient: empty model");
  const Cut* best = nullptr;
  Extended best_val = -std::numeric_limits<Extended>::infinity();
  for (const auto& c : cuts_) {
    const Extended v = c.exact_value(x);
    if (best == nullptr || v > best_val) {
      best = &c;
      best_val = v;
    }
  }
  if (best == nullptr || (floor_ && *floor_ > best_val)) return Vector::Zero(x.size());
  return best->slope;
}

std::pair<Matrix, Vector> BundleModel::stacked() const {
  if (empty()) throw std::logic_error("stacked: empty model");
  const Index d = cuts_.empty() ? 0 : cuts_.front().slope.size();
  const Index T = pieces();
  Matrix G = Matrix::Zero(d, T);
  Vector b(T);
  Index t = 0;
  for (const auto& c : cuts_) {
    G.col(t) = c.slope;
    b[t] = static_cast<double>(c.intercept);
    ++t;
  }
  if (floor_) b[t] = *floor_;
  return {std::move(G), std::move(b)};
}

void BundleModel::push(Cut cut) {
  if (!cuts_.empty() && cut.slope.size() != cuts_.front().slope.size())
    throw std::invalid_argument("cut dimension differs from the model");
  cuts_.push_back(std::move(cut));
  while (static_cast<Index>(cuts_.size()) > capacity_) cuts_.pop_front();
}

void BundleModel::check_invariants() const {
  const auto n = static_cast<Index>(cuts_.size());
  auto fail = [&](const char* what) { throw std::logic_error(to_string(policy_) + " model: " + what); };
  switch (policy_) {
    case ModelPolicy::polyak:
      if (n != 1 || !floor_) fail("needs exactly one cut and a floor");
      break;
    case ModelPolicy::cutting_plane:
      if (n < 1 || n > capacity_ || floor_) fail("needs 1..M cuts and no floor");
      break;
    case ModelPolicy::polyak_cutting_plane:
      if (n < 1 || n > capacity_ || !floor_) fail("needs 1..M cuts and a floor");
      break;
    case ModelPolicy::two_cut:
      if (n < 1 || n > 2 || floor_) fail("needs at most two cuts and no floor");
      break;
  }
}

BundleModel update_polyak(Extended f_val, const Vector& grad, const Vector& x_k, double floor, long origin) {
  if (floor > f_val)
    throw std::invalid_argument("polyak model: floor " + std::to_string(floor) + " exceeds f(x_k) = " +
                                std::to_string(f_val) + "; not a valid lower bound");
  BundleModel m(ModelPolicy::polyak, 1, floor);
  m.push(Cut::linearization(f_val, grad, x_k, origin));
  return m;
}

BundleModel update_cutting_plane(BundleModel model, Extended f_val, const Vector& grad, const Vector& x_k,
                                 long origin) {
  if (model.policy() != ModelPolicy::cutting_plane && model.policy() != ModelPolicy::polyak_cutting_plane)
    throw std::invalid_argument("update_cutting_plane: model policy is " + to_string(model.policy()));
  model.push(Cut::linearization(f_val, grad, x_k, origin));
  return model;
}

BundleModel update_two_cut(const BundleModel& model, const Vector& x_next, Extended f_next, const Vector& grad_next,
                           long origin) {
  if (model.empty()) throw std::logic_error("update_two_cut: empty model");
  const Extended anchor_value = model.exact_value(x_next);
  const Vector anchor_slope = model.subgradient(x_next);
  BundleModel next(ModelPolicy::two_cut, 2);
  next.push(Cut{anchor_slope, anchor_value - dot_extended(anchor_slope, x_next), origin});
  next.push(Cut::linearization(f_next, grad_next, x_next, origin));
  return next;
}

BundleModel initial_model(ModelPolicy policy, Index capacity, std::optional<double> floor, Extended f_val,
                          const Vector& grad, const Vector& x0) {
  switch (policy) {
    case ModelPolicy::polyak:
      if (!floor) throw std::invalid_argument("polyak model needs a floor");
      return update_polyak(f_val, grad, x0, *floor, 0);
    case ModelPolicy::two_cut: {
      BundleModel m(ModelPolicy::two_cut, 2);
      m.push(Cut::linearization(f_val, grad, x0, 0));
      return m;
    }
    case ModelPolicy::cutting_plane:
    case ModelPolicy::polyak_cutting_plane: {
      BundleModel m(policy, capacity, policy == ModelPolicy::polyak_cutting_plane ? floor : std::nullopt);
      m.push(Cut::linearization(f_val, grad, x0, 0));
      return m;
    }
  }
  throw std::logic_error("unreachable");
}

BundleModel refresh_model(BundleModel model, Extended f_val, const Vector& grad, const Vector& x_new, long origin) {
  switch (model.policy()) {
    case ModelPolicy::polyak:
      return update_polyak(f_val, grad, x_new, *model.floor(), origin);
    case ModelPolicy::cutting_plane:
    case ModelPolicy::polyak_cutting_plane:
      return update_cutting_plane(std::move(model), f_val, grad, x_new, origin);
    case ModelPolicy::two_cut:
      return update_two_cut(model, x_new, f_val, grad, origin);
  }
  throw std::logic_error("unreachable");
}

}  // namespace dpbm
