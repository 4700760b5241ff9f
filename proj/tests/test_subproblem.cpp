#include <doctest.h>

#include <random>

#include "dpbm/subproblem.hpp"
#include "dpbm/verify.hpp"

using namespace dpbm;

namespace {

SubproblemInstance one_d(std::initializer_list<double> slopes, std::initializer_list<double> intercepts, double center,
                         double gamma, Regularizer reg = Regularizer::none()) {
  SubproblemInstance inst;
  inst.slopes = Matrix(1, static_cast<Index>(slopes.size()));
  Index t = 0;
  for (double g : slopes) inst.slopes(0, t++) = g;
  inst.intercepts = Vector(static_cast<Index>(intercepts.size()));
  t = 0;
  for (double b : intercepts) inst.intercepts[t++] = b;
  inst.center = Vector::Constant(1, center);
  inst.gamma = gamma;
  inst.reg = std::move(reg);
  return inst;
}

const DualOptions kTight{1e-11, 100000, DualMethod::fista};

}  // namespace

TEST_CASE("simplex projection") {
  CHECK((project_simplex(Vector{{0.5, 0.5}}) - Vector{{0.5, 0.5}}).norm() < 1e-15);
  CHECK((project_simplex(Vector{{1.0, 1.0, 1.0}}) - Vector::Constant(3, 1.0 / 3.0)).norm() < 1e-15);
  CHECK((project_simplex(Vector{{2.0, 0.0}}) - Vector{{1.0, 0.0}}).norm() < 1e-15);
  CHECK_THROWS(project_simplex(Vector(0)));
}

TEST_CASE("simplex projection is a feasible, idempotent projection") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const Index T = 1 + t % 9;
    const Vector u = Vector::NullaryExpr(T, [&] { return N(rng); });
    const Vector p = project_simplex(u);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((project_simplex(p) - p).norm() < 1e-14);
    // Variational inequality: <u - p, q - p> <= 0 for all simplex points q, checked at vertices.
    for (Index k = 0; k < T; ++k) CHECK((u - p).dot(Vector::Unit(T, k) - p) <= 1e-12);
  }
}

TEST_CASE("assembled center") {
  BundleModel m(ModelPolicy::cutting_plane, 3);
  m.push(Cut{Vector::Constant(1, 0.0), 0.0, 0});
  const Vector x = Vector::Constant(1, 1.0);
  // Triangle, w_ij = 1/3, both neighbors at 0, gamma/alpha = 1.
  const Vector penalty = Vector::Constant(1, (1.0 - 0.0) / 3.0 + (1.0 - 0.0) / 3.0);
  const SubproblemInstance inst = assemble_subproblem(m, x, penalty, 2.0, 2.0, Regularizer::none());
  CHECK(inst.center[0] == doctest::Approx(1.0 / 3.0));
  CHECK(assemble_subproblem(m, x, Vector::Zero(1), 2.0, 0.5, Regularizer::none()).center == x);
  CHECK_THROWS(assemble_subproblem(m, x, penalty, 2.0, 0.0, Regularizer::none()));
}

TEST_CASE("dual objective examples") {
  SubproblemInstance inst;
  inst.slopes = Matrix(2, 1);
  inst.slopes << 3.0, -4.0;
  inst.intercepts = Vector::Zero(1);
  inst.center = Vector::Zero(2);
  inst.gamma = 1.0;
  CHECK(dual_objective(Vector::Ones(1), inst).value == doctest::Approx(-12.5));

  // One cut: the dual value at v = (1) is the primal optimum.
  std::mt19937_64 rng(2);
  for (RegKind reg : {RegKind::zero, RegKind::l1, RegKind::box}) {
    const SubproblemInstance one = random_instance(1, 4, reg, rng);
    const Vector x = recover_primal(Vector::Ones(1), one);
    CHECK(dual_objective(Vector::Ones(1), one).value == doctest::Approx(one.objective(x)).epsilon(1e-12));
  }
}

TEST_CASE("dual gradient matches central differences") {
  std::mt19937_64 rng(3);
  for (RegKind reg : {RegKind::zero, RegKind::l1, RegKind::box}) {
    const SubproblemInstance inst = random_instance(5, 4, reg, rng);
    const Vector v = project_simplex(Vector::LinSpaced(5, 0.1, 0.5));
    const Vector g = dual_objective(v, inst).gradient;
    Vector fd(5);
    for (Index k = 0; k < 5; ++k) {
      Vector p = v, m = v;
      p[k] += 1e-6;
      m[k] -= 1e-6;
      fd[k] = (dual_objective(p, inst).value - dual_objective(m, inst).value) / 2e-6;
    }
    CHECK((g - fd).norm() / std::max(1.0, fd.norm()) < 1e-5);
  }
}

TEST_CASE("weak duality and concavity") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const RegKind reg = std::array{RegKind::zero, RegKind::l1, RegKind::box}[t % 3];
    const SubproblemInstance inst = random_instance(2 + t % 7, 3, reg, rng);
    const Index T = inst.pieces();
    const Vector v = project_simplex(Vector::NullaryExpr(T, [&] { return N(rng); }));
    const Vector w = project_simplex(Vector::NullaryExpr(T, [&] { return N(rng); }));
    Vector x = Vector::NullaryExpr(3, [&] { return N(rng); });
    if (reg == RegKind::box) x = x.cwiseMax(inst.reg.lo).cwiseMin(inst.reg.hi);
    const DualEval ev = dual_objective(v, inst);
    CHECK(ev.value <= inst.objective(x) + 1e-10);
    // Concave: q(w) <= q(v) + <grad q(v), w - v>.
    CHECK(dual_objective(w, inst).value <= ev.value + ev.gradient.dot(w - v) + 1e-10);
  }
}

TEST_CASE("solve dual examples") {
  std::mt19937_64 rng(5);
  const SubproblemInstance one = random_instance(1, 3, RegKind::l1, rng);
  const DualResult r = solve_dual(one);
  CHECK(r.converged);
  CHECK(r.iterations <= 1);

  // Duplicate cuts: any optimal v, unique primal.
  SubproblemInstance dup = random_instance(2, 3, RegKind::zero, rng);
  dup.slopes.col(1) = dup.slopes.col(0);
  dup.intercepts[1] = dup.intercepts[0];
  const Vector x = solve_subproblem(dup, kTight).x;
  CHECK((x - recover_primal(Vector{{1.0, 0.0}}, dup)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((x - recover_primal(Vector{{0.3, 0.7}}, dup)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((x - brute_force_primal(dup).x).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("both dual methods reach the same solution") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const SubproblemInstance inst = random_instance(6, 5, RegKind::l1, rng);
    const SubproblemSolution a = solve_subproblem(inst, kTight);
    DualOptions ap = kTight;
    ap.method = DualMethod::adaptive_pg;
    const SubproblemSolution b = solve_subproblem(inst, ap);
    CHECK(a.dual.converged);
    CHECK(b.dual.converged);
    CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("hitting the iteration cap is reported, not thrown") {
  std::mt19937_64 rng(7);
  const SubproblemInstance inst = random_instance(15, 10, RegKind::l1, rng);
  const DualResult r = solve_dual(inst, DualOptions{1e-15, 2, DualMethod::fista});
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
}

TEST_CASE("recover primal with a zero cut is the center") {
  const SubproblemInstance inst = one_d({0.0}, {0.0}, 0.7, 1.3);
  CHECK(recover_primal(Vector::Ones(1), inst)[0] == 0.7);
}

TEST_CASE("brute force oracle examples") {
  const SubproblemInstance one = one_d({2.0}, {1.0}, 0.5, 0.25);
  const OracleResult r = brute_force_primal(one);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(0.5 - 0.25 * 2.0).epsilon(1e-10));

  const SubproblemInstance kink = one_d({1.0, -1.0}, {0.0, 0.0}, 0.3, 1.0);
  double best = 0.0, best_val = 1e300;
  for (double x = -1.0; x <= 1.0; x += 1e-6)
    if (kink.objective(Vector::Constant(1, x)) < best_val) best_val = kink.objective(Vector::Constant(1, x)), best = x;
  const OracleResult k = brute_force_primal(kink);
  CHECK(std::abs(k.x[0] - best) < 1e-5);
  CHECK(k.objective <= best_val + 1e-10);
  CHECK(std::abs(solve_subproblem(kink, kTight).x[0]) < 1e-8);
}

TEST_CASE("dual route agrees with the oracle") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const RegKind reg = std::array{RegKind::zero, RegKind::l1, RegKind::box}[t % 3];
    const SubproblemInstance inst = random_instance(std::array<Index, 3>{2, 5, 15}[(t / 3) % 3], 2 + t % 9, reg, rng);
    const SubproblemSolution sol = solve_subproblem(inst, kTight);
    const OracleResult orc = brute_force_primal(inst);
    CHECK((sol.x - orc.x).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(orc.objective <= inst.objective(sol.x) + 1e-6);
    const double gap = inst.objective(sol.x) - dual_objective(sol.dual.v, inst).value;
    CHECK(gap >= -1e-9);
    CHECK(gap <= 1e-6);
  }
}

TEST_CASE("FISTA iteration counts at a scaled size") {
  std::mt19937_64 rng(9);
  int within = 0;
  for (int t = 0; t < 20; ++t) {
    const SubproblemInstance inst = random_instance(15, 100, RegKind::l1, rng);
    const DualResult r = solve_dual(inst, DualOptions{1e-7, 200, DualMethod::fista, 0});
    within += r.converged ? 1 : 0;
  }
  CHECK(within >= 19);
}

TEST_CASE("oracle suite") {
  const SuiteReport rep = verify_subproblem_suite(30, 17);
  CHECK(rep.ok());
}
