#include <doctest.h>

#include <cmath>

#include "dpbm/algorithms.hpp"
#include "dpbm/metrics.hpp"
#include "dpbm/verify.hpp"

using namespace dpbm;

namespace {

const DualOptions kTight{1e-12, 100000, DualMethod::fista};

AlgoConfig dpbm_config(ModelPolicy policy, StepSizePolicy step, double alpha = 0.5) {
  AlgoConfig cfg;
  cfg.alpha = alpha;
  cfg.policy = policy;
  cfg.M = 5;
  cfg.step = step;
  cfg.dual = kTight;
  return cfg;
}

Problem zero_problem(Index n, Index d) {
  Problem p;
  for (Index i = 0; i < n; ++i) p.locals.push_back(LocalObjective::quadratic(Matrix::Zero(d, d), Vector::Zero(d)));
  return p;
}

Matrix random_start(Index d, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  return Matrix::NullaryExpr(d, n, [&] { return N(rng); });
}

}  // namespace

TEST_CASE("fixed step examples") {
  CHECK(fixed_step(1.0, 1.0, 3.0, 0.5) == doctest::Approx(0.5));
  CHECK(fixed_step(0.0, 1.0 / 3.0, 2.0, 0.9) == doctest::Approx(2.7));
  const double bound = 1.0 / (2.0 + (1.0 - 0.25) / 0.5);
  for (double eta : {0.9, 0.99, 0.999999}) CHECK(fixed_step(2.0, 0.25, 0.5, eta) < bound);
  CHECK_THROWS(fixed_step(1.0, 0.5, 1.0, 1.0));
  CHECK_THROWS(fixed_step(1.0, 0.0, 1.0, 0.5));
  CHECK_THROWS(fixed_step(0.0, 1.0, 1.0, 0.5));
}

TEST_CASE("beta_k examples") {
  CHECK(compute_beta_k(3.0, 3.0, 0.5) == 0.0);
  // f = x^2, model = tangent at 1, new point 0.
  CHECK(compute_beta_k(0.0, -1.0, 1.0) == doctest::Approx(2.0));
  CHECK(compute_beta_k(1.0, 0.0, 0.0) == 0.0);
  CHECK_THROWS(compute_beta_k(1.0, 1.1, 1.0));
  CHECK(compute_beta_k(1.0, 1.1, 1.0, true) == 0.0);
  CHECK(compute_beta_k(1.0, 1.0 + 1e-15, 1.0) == 0.0);
}

TEST_CASE("pure consensus step when f and h vanish") {
  const Graph g = build_topology(Topology::ring, 5);
  const Matrix W = metropolis_weights(g);
  const Problem p = zero_problem(5, 3);
  const Matrix X = random_start(3, 5, 1);
  const AlgoConfig cfg = dpbm_config(ModelPolicy::cutting_plane, StepSizePolicy::constant(0.3));
  auto nodes = make_nodes(p, g, W, cfg, X, 1);
  for (auto& node : nodes) {
    const Vector expect = node.x - (0.3 / cfg.alpha) * node.penalty_sum();
    dpbm_node_update(node, 0.3, cfg, p.reg, 0);
    CHECK((node.x - expect).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("a single node takes a centralized proximal bundle step") {
  Problem p = make_quadratic_problem(1, 4, 0.5, Regularizer::l1(0.2), 3);
  const Graph g(1);
  const Matrix W = Matrix::Ones(1, 1);
  const Matrix X = random_start(4, 1, 2);
  const AlgoConfig cfg = dpbm_config(ModelPolicy::cutting_plane, StepSizePolicy::constant(0.7));
  NodeState node = make_node(0, p, g, W, cfg, X, 0);
  SubproblemInstance inst = assemble_subproblem(node.model, node.x, Vector::Zero(4), cfg.alpha, 0.7, p.reg);
  const Vector expect = solve_subproblem(inst, kTight).x;
  dpbm_node_update(node, 0.7, cfg, p.reg, 0);
  CHECK((node.x - expect).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("penalized optimum is a fixed point of every model") {
  const Graph g = build_topology(Topology::ring, 4);
  const Matrix W = metropolis_weights(g);
  const double alpha = 0.5;
  const Problem p = make_quadratic_problem(4, 3, 1.0, Regularizer::l1(0.1), 5);
  const PenalizedResult star = penalized_optimum(p, W, alpha);
  REQUIRE(star.converged);
  for (auto policy : {ModelPolicy::polyak, ModelPolicy::cutting_plane, ModelPolicy::polyak_cutting_plane,
                      ModelPolicy::two_cut}) {
    AlgoConfig cfg = dpbm_config(policy, StepSizePolicy::fixed(0.9), alpha);
    if (policy == ModelPolicy::polyak || policy == ModelPolicy::polyak_cutting_plane) cfg.floor = -1e3;
    auto nodes = make_nodes(p, g, W, cfg, star.X, 2);
    for (Index i = 0; i < 4; ++i) {
      auto& node = nodes[static_cast<std::size_t>(i)];
      node_update(node, cfg, p.reg, 0);
      CHECK((node.x - star.X.col(i)).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("back-tracking") {
  const Graph g = build_topology(Topology::ring, 4);
  const Matrix W = metropolis_weights(g);
  const double alpha = 0.5, eta = 0.9, c = 0.5;
  const Problem p = make_quadratic_problem(4, 3, 1.0, Regularizer::l1(0.1), 6);
  const Matrix X = random_start(3, 4, 3);

  SUBCASE("a small initial step is accepted at once") {
    const AlgoConfig cfg = dpbm_config(ModelPolicy::cutting_plane, StepSizePolicy::backtracking(eta, c, 1e-3), alpha);
    auto nodes = make_nodes(p, g, W, cfg, X, 1);
    for (auto& node : nodes) CHECK(backtracking_update(node, cfg, p.reg, 0).attempts == 1);
  }

  SUBCASE("a huge initial step needs about the logarithmic bound") {
    const double gamma_init = 1e4;
    const AlgoConfig cfg = dpbm_config(ModelPolicy::cutting_plane, StepSizePolicy::backtracking(eta, c, gamma_init), alpha);
    auto nodes = make_nodes(p, g, W, cfg, X, 1);
    for (auto& node : nodes) {
      const int bound = backtracking_attempt_bound(gamma_init, node.beta, node.self_weight, alpha, eta, c);
      const UpdateRecord rec = backtracking_update(node, cfg, p.reg, 0);
      CHECK(rec.attempts >= 2);
      CHECK(rec.attempts <= bound + 1);
    }
  }

  SUBCASE("accepted steps satisfy the acceptance predicate over a run") {
    const AlgoConfig cfg = dpbm_config(ModelPolicy::cutting_plane, StepSizePolicy::backtracking(eta, c, 50.0), alpha);
    auto nodes = make_nodes(p, g, W, cfg, X, 1);
    for (long k = 0; k < 30; ++k) {
      for (auto& node : nodes) {
        const UpdateRecord rec = node_update(node, cfg, p.reg, k);
        CHECK(rec.gamma * (rec.beta_k + (1.0 - node.self_weight) / alpha) <= eta * (1 + 1e-12));
      }
      for (auto& node : nodes)
        for (std::size_t s = 0; s < node.neighbors.size(); ++s)
          node.receive(s, nodes[static_cast<std::size_t>(node.neighbors[s].id)].x, k + 1);
    }
  }
}

TEST_CASE("attempt bound formula") {
  CHECK(backtracking_attempt_bound(0.01, 1.0, 0.5, 1.0, 0.9, 0.5) == 1);
  // ratio = 100 * 1.5 / 0.9 = 166.7, log2 = 7.38 -> 8 halvings + the accepted try.
  CHECK(backtracking_attempt_bound(100.0, 1.0, 0.5, 1.0, 0.9, 0.5) == 9);
}

TEST_CASE("prox-dgd step") {
  const Graph g = build_topology(Topology::ring, 5);
  const Matrix W = metropolis_weights(g);
  const Matrix X = random_start(2, 5, 4);
  CHECK((prox_dgd_step(X, W, 0.3, zero_problem(5, 2)) - X * W).norm() < 1e-14);

  const Problem one = make_quadratic_problem(1, 3, 0.0, Regularizer::l1(0.3), 7);
  const Matrix x = random_start(3, 1, 5);
  const Vector expect = prox(one.reg, Vector(x.col(0) - 0.2 * one.locals[0].gradient(x.col(0))), 0.2);
  CHECK((prox_dgd_step(x, Matrix::Ones(1, 1), 0.2, one).col(0) - expect).norm() < 1e-14);
}

TEST_CASE("node-form prox-dgd matches the matrix form") {
  const Graph g = build_topology(Topology::ring, 5);
  const Matrix W = metropolis_weights(g);
  const Problem p = make_quadratic_problem(5, 3, 0.0, Regularizer::l1(0.1), 8);
  Matrix X = random_start(3, 5, 6);
  AlgoConfig cfg;
  cfg.algorithm = Algorithm::prox_dgd;
  cfg.alpha = 0.4;
  auto nodes = make_nodes(p, g, W, cfg, X, 1);
  for (long k = 0; k < 20; ++k) {
    X = prox_dgd_step(X, W, cfg.alpha, p);
    for (auto& node : nodes) node_update(node, cfg, p.reg, k);
    for (auto& node : nodes)
      for (std::size_t s = 0; s < node.neighbors.size(); ++s)
        node.receive(s, nodes[static_cast<std::size_t>(node.neighbors[s].id)].x, k + 1);
  }
  for (Index i = 0; i < 5; ++i) CHECK((nodes[static_cast<std::size_t>(i)].x - X.col(i)).norm() < 1e-12);
}

TEST_CASE("reduction suite") { CHECK(verify_reduction_suite().ok()); }

TEST_CASE("minorant suite, reduced size") { CHECK(verify_minorant_suite(500, 21).ok()); }

TEST_CASE("node state bookkeeping") {
  const Graph g = build_topology(Topology::path, 3);
  const Matrix W = metropolis_weights(g);
  const Problem p = make_quadratic_problem(3, 2, 0.0, Regularizer::none(), 1);
  const AlgoConfig cfg = dpbm_config(ModelPolicy::cutting_plane, StepSizePolicy::fixed(0.9));
  NodeState node = make_node(1, p, g, W, cfg, Matrix::Zero(2, 3), 0);
  CHECK(node.neighbors.size() == 2);
  node.receive(0, Vector::Ones(2), 3);
  CHECK_THROWS_AS(node.receive(0, Vector::Ones(2), 2), std::logic_error);
  CHECK(node.penalty_sum().isApprox(-W(1, 0) * Vector::Ones(2)));
  CHECK_THROWS(make_nodes(p, g, W, cfg, Matrix::Zero(3, 3), 0));
}

TEST_CASE("stochastic configuration") {
  const Dataset data = make_synthetic_logistic(60, 3, 2);
  const Problem p = make_logistic_problem(data, 3, 0.1, Regularizer::l1(1e-3), 1);
  const Graph g = build_topology(Topology::ring, 3);
  const Matrix W = metropolis_weights(g);
  AlgoConfig cfg = dpbm_config(ModelPolicy::polyak_cutting_plane, StepSizePolicy::fixed(0.9));
  cfg.batch_size = 5;
  auto a = make_nodes(p, g, W, cfg, Matrix::Zero(3, 3), 9);
  auto b = make_nodes(p, g, W, cfg, Matrix::Zero(3, 3), 9);
  CHECK(a[0].beta == doctest::Approx(2.0 * p.locals[0].sample_smoothness()));
  CHECK(a[0].model.floor().value() == 0.0);
  stochastic_node_update(a[1], 0.1, cfg, p.reg, 0);
  stochastic_node_update(b[1], 0.1, cfg, p.reg, 0);
  CHECK(a[1].x == b[1].x);
  CHECK_THROWS(dpbm_node_update(a[1], 0.1, cfg, p.reg, 1));
  cfg.batch_size = 1000;
  CHECK_THROWS(make_nodes(p, g, W, cfg, Matrix::Zero(3, 3), 9));
}
