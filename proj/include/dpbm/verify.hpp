#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <json.hpp>

#include "dpbm/subproblem.hpp"

namespace dpbm {

struct SuiteReport {
  std::string suite;
  int passed = 0;
  int total = 0;
  /// Worst observed error for the suite's main comparison.
  double worst = 0.0;
  /// First failing case, serialized.
  nlohmann::json counterexample;

  bool ok() const { return total > 0 && passed == total; }
  nlohmann::json to_json() const;
};

/// Random subproblem: N(0,1) slopes and intercepts, center N(0, 4), gamma in
/// [0.1, 2], l1 weight in [0.1, 1], box half-widths in [0.2, 1].
SubproblemInstance random_instance(Index pieces, Index dim, RegKind reg, std::mt19937_64& rng);

/// Dual route vs interior-point oracle on random instances (T in {2,5,15},
/// d in {2,10}, zero/l1/box): primal agreement and duality gap within 1e-6.
SuiteReport verify_subproblem_suite(int instances = 100, std::uint64_t seed = 7);

/// m <= f <= m + (L/2)||x - x_k||^2 for all four policies, quadratic and logistic losses.
SuiteReport verify_minorant_suite(int probes = 10000, std::uint64_t seed = 11);

/// Single-cut DPBM with gamma = alpha against matrix-form Prox-DGD, 100 iterations.
SuiteReport verify_reduction_suite(std::uint64_t seed = 3);

/// Generated schedules pass verification and crafted violations are caught.
SuiteReport verify_schedule_suite(std::uint64_t seed = 5);

/// Dispatches by name: subproblem | minorant | reduction | schedule.
SuiteReport run_suite(const std::string& name);

}  // namespace dpbm
