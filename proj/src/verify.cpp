#include "dpbm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "dpbm/algorithms.hpp"
#include "dpbm/async_sim.hpp"
#include "dpbm/bundle.hpp"
#include "dpbm/graph.hpp"
#include "dpbm/problem.hpp"

namespace dpbm {

using nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json cols = json::array();
  for (Index c = 0; c < m.cols(); ++c) cols.push_back(to_json(Vector(m.col(c))));
  return cols;
}

Vector gaussian(Index d, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, scale);
  Vector v(d);
  for (Index k = 0; k < d; ++k) v[k] = N(rng);
  return v;
}

double uniform(double lo, double hi, std::mt19937_64& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

void record(SuiteReport& rep, bool ok, double error, const std::function<json()>& describe) {
  ++rep.total;
  rep.worst = std::max(rep.worst, error);
  if (ok) ++rep.passed;
  else if (rep.counterexample.is_null()) rep.counterexample = describe();
}

}  // namespace

json SuiteReport::to_json() const {
  json j = {{"suite", suite}, {"passed", passed}, {"total", total}, {"worst", worst}, {"ok", ok()}};
  if (!counterexample.is_null()) j["counterexample"] = counterexample;
  return j;
}

SubproblemInstance random_instance(Index pieces, Index dim, RegKind reg, std::mt19937_64& rng) {
  SubproblemInstance inst;
  inst.slopes.resize(dim, pieces);
  for (Index t = 0; t < pieces; ++t) inst.slopes.col(t) = gaussian(dim, 1.0, rng);
  inst.intercepts = gaussian(pieces, 1.0, rng);
  inst.center = gaussian(dim, 2.0, rng);
  inst.gamma = uniform(0.1, 2.0, rng);
  switch (reg) {
    case RegKind::zero:
      inst.reg = Regularizer::none();
      break;
    case RegKind::l1:
      inst.reg = Regularizer::l1(uniform(0.1, 1.0, rng));
      break;
    case RegKind::box: {
      Vector lo(dim), hi(dim);
      for (Index k = 0; k < dim; ++k) {
        lo[k] = -uniform(0.2, 1.0, rng);
        hi[k] = uniform(0.2, 1.0, rng);
      }
      inst.reg = Regularizer::box(lo, hi);
      break;
    }
  }
  return inst;
}

SuiteReport verify_subproblem_suite(int instances, std::uint64_t seed) {
  SuiteReport rep;
  rep.suite = "subproblem";
  std::mt19937_64 rng(seed);
  const Index Ts[] = {2, 5, 15};
  const Index ds[] = {2, 10};
  const RegKind regs[] = {RegKind::zero, RegKind::l1, RegKind::box};
  DualOptions opts;
  opts.tol = 1e-11;
  opts.max_iter = 100000;
  for (int k = 0; k < instances; ++k) {
    const int c = k % 18;
    const SubproblemInstance inst = random_instance(Ts[c % 3], ds[(c / 3) % 2], regs[c / 6], rng);
    const SubproblemSolution sol = solve_subproblem(inst, opts);
    const OracleResult oracle = brute_force_primal(inst);
    const double err = (sol.x - oracle.x).lpNorm<Eigen::Infinity>();
    const double gap = inst.objective(sol.x) - dual_objective(sol.dual.v, inst).value;
    const bool ok = err <= 1e-6 && gap <= 1e-6 && gap >= -1e-9;
    record(rep, ok, std::max(err, std::abs(gap)), [&] {
      return json{{"instance", k},
                  {"reg", to_string(inst.reg.kind)},
                  {"gamma", inst.gamma},
                  {"center", to_json(inst.center)},
                  {"slopes", to_json(inst.slopes)},
                  {"intercepts", to_json(inst.intercepts)},
                  {"primal_error", err},
                  {"duality_gap", gap},
                  {"dual_iterations", sol.dual.iterations},
                  {"oracle_gap", oracle.gap}};
    });
  }
  return rep;
}

SuiteReport verify_minorant_suite(int probes, std::uint64_t seed) {
  SuiteReport rep;
  rep.suite = "minorant";
  std::mt19937_64 rng(seed);
  const Index d = 3;

  Matrix B(d, d);
  for (Index c = 0; c < d; ++c) B.col(c) = gaussian(d, 1.0, rng);
  std::vector<LocalObjective> losses;
  losses.push_back(LocalObjective::quadratic(B.transpose() * B + 0.1 * Matrix::Identity(d, d), gaussian(d, 1.0, rng)));
  losses.push_back(LocalObjective::logistic(make_synthetic_logistic(20, d, seed)));

  const ModelPolicy policies[] = {ModelPolicy::polyak, ModelPolicy::cutting_plane, ModelPolicy::polyak_cutting_plane,
                                  ModelPolicy::two_cut};
  for (const auto& f : losses) {
    const double L = f.smoothness();
    for (ModelPolicy policy : policies) {
      const bool floored = policy == ModelPolicy::polyak || policy == ModelPolicy::polyak_cutting_plane;
      const std::optional<double> floor = floored ? std::optional<double>(f.lower_bound()) : std::nullopt;
      BundleModel model;
      Vector anchor;
      for (int p = 0; p < probes; ++p) {
        if (p % 100 == 0) {
          anchor = gaussian(d, 2.0, rng);
          auto [f0, g0] = f.value_grad(anchor);
          model = initial_model(policy, 5, floor, f0, g0, anchor);
          const int steps = std::uniform_int_distribution<int>(0, 12)(rng);
          for (int s = 0; s < steps; ++s) {
            anchor = gaussian(d, 2.0, rng);
            auto [fv, gv] = f.value_grad(anchor);
            model = refresh_model(std::move(model), fv, gv, anchor, s + 1);
          }
          model.check_invariants();
        }
        const Vector x = anchor + gaussian(d, uniform(0.01, 3.0, rng), rng);
        const double fx = f.value(x);
        const double mx = model.value(x);
        const double upper = mx + 0.5 * L * (x - anchor).squaredNorm();
        const double violation = std::max(mx - fx, fx - upper);
        record(rep, violation <= 1e-10, std::max(0.0, violation), [&] {
          return json{{"policy", to_string(policy)},
                      {"loss", f.kind() == LossKind::quadratic ? "quadratic" : "logistic"},
                      {"x", to_json(x)},
                      {"anchor", to_json(anchor)},
                      {"f", fx},
                      {"model", mx},
                      {"upper", upper}};
        });
      }
    }
  }
  return rep;
}

SuiteReport verify_reduction_suite(std::uint64_t seed) {
  SuiteReport rep;
  rep.suite = "reduction";
  const Index n = 6, d = 4;
  const double alpha = 0.3;
  const long K = 100;
  const Graph g = build_topology(Topology::ring, n);
  const Matrix W = metropolis_weights(g);
  const Problem problem = make_quadratic_problem(n, d, 0.0, Regularizer::l1(0.1), seed);
  std::mt19937_64 rng(seed);
  Matrix x0(d, n);
  for (Index i = 0; i < n; ++i) x0.col(i) = gaussian(d, 1.0, rng);

  std::vector<Matrix> direct{x0};
  for (long k = 0; k < K; ++k) direct.push_back(prox_dgd_step(direct.back(), W, alpha, problem));

  const AsyncSchedule sync = schedule_partial(g, K, 0, 0, seed);
  auto compare = [&](const char* name, const AlgoConfig& cfg) {
    const Trace trace = run_simulation(problem, g, W, cfg, sync, x0, seed);
    double dev = 0.0;
    for (std::size_t t = 0; t < trace.snapshots.size(); ++t)
      dev = std::max(dev, (trace.snapshots[t] - direct[static_cast<std::size_t>(trace.iterations[t])])
                              .lpNorm<Eigen::Infinity>());
    record(rep, dev <= 1e-8, dev, [&] { return json{{"variant", name}, {"max_deviation", dev}}; });
  };

  AlgoConfig single_cut;
  single_cut.alpha = alpha;
  single_cut.policy = ModelPolicy::cutting_plane;
  single_cut.M = 1;
  single_cut.step = StepSizePolicy::constant(alpha);
  single_cut.dual.tol = 1e-12;
  compare("single-cut dpbm, gamma = alpha", single_cut);

  AlgoConfig node_form = single_cut;
  node_form.algorithm = Algorithm::prox_dgd;
  compare("node-local prox-dgd", node_form);
  return rep;
}

SuiteReport verify_schedule_suite(std::uint64_t seed) {
  SuiteReport rep;
  rep.suite = "schedule";
  const Graph g = build_topology(Topology::ring, 8);
  auto expect_ok = [&](const AsyncSchedule& s, const std::string& what) {
    const ScheduleReport r = verify_schedule(s);
    record(rep, r.ok, 0.0, [&] { return json{{"case", what}, {"violation", r.message}, {"tick", r.tick}}; });
  };

  for (long B : {0L, 1L, 3L})
    for (long D : {0L, 2L, 5L, 20L})
      expect_ok(schedule_partial(g, 500, B, D, seed + static_cast<std::uint64_t>(10 * B + D)),
                "partial B=" + std::to_string(B) + " D=" + std::to_string(D));

  {
    const AsyncSchedule s = schedule_partial(g, 200, 0, 0, seed);
    bool sync = true;
    for (long k = 0; k < s.horizon; ++k)
      for (Index i = 0; i < s.nodes(); ++i) {
        const auto uk = static_cast<std::size_t>(k), ui = static_cast<std::size_t>(i);
        sync = sync && s.active[uk][ui];
        for (long r : s.reads[uk][ui]) sync = sync && r == k;
      }
    record(rep, sync, 0.0, [] { return json{{"case", "B=D=0 must be synchronous"}}; });
  }

  {
    const AsyncSchedule s = schedule_total(g, 3000, seed, Growth::sqrt);
    expect_ok(s, "total sqrt");
    // Reads after tick K' never fall below K' - g(K'): stale information is purged.
    bool purged = true;
    for (long Kp : {100L, 500L, 1000L, 2000L}) {
      long lowest = s.horizon;
      for (long k = Kp; k < s.horizon; ++k)
        for (Index i = 0; i < s.nodes(); ++i) {
          const auto uk = static_cast<std::size_t>(k), ui = static_cast<std::size_t>(i);
          if (!s.active[uk][ui]) continue;
          for (long r : s.reads[uk][ui]) lowest = std::min(lowest, r);
        }
      purged = purged && lowest >= Kp - envelope(Growth::sqrt, Kp);
    }
    record(rep, purged, 0.0, [] { return json{{"case", "total schedule keeps stale reads"}}; });
  }

  {
    const long B = 2;
    AsyncSchedule s = schedule_partial(g, 100, B, 1, seed);
    for (long k = 10; k < 10 + B + 2; ++k) s.active[static_cast<std::size_t>(k)][3] = 0;
    const ScheduleReport r = verify_schedule(s);
    record(rep, !r.ok && r.node == 3, 0.0, [&] { return json{{"case", "silent node undetected"}, {"report", r.message}}; });
  }

  {
    const long D = 5;
    AsyncSchedule s = schedule_partial(g, 100, 0, D, seed);
    const long k = 50;
    s.reads[static_cast<std::size_t>(k)][2][1] = k - D - 1;
    const ScheduleReport r = verify_schedule(s);
    const Index j = s.neighbors[2][1];
    record(rep, !r.ok && r.node == 2 && r.neighbor == j && r.tick == k, 0.0,
           [&] { return json{{"case", "injected delay misreported"}, {"report", r.message}, {"tick", r.tick}}; });
  }
  return rep;
}

SuiteReport run_suite(const std::string& name) {
  if (name == "subproblem") return verify_subproblem_suite();
  if (name == "minorant") return verify_minorant_suite();
  if (name == "reduction") return verify_reduction_suite();
  if (name == "schedule") return verify_schedule_suite();
  throw std::invalid_argument("unknown suite '" + name + "' (subproblem, minorant, reduction, schedule)");
}

}  // namespace dpbm
