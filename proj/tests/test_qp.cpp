#include "mfg/qp.hpp"

#include "oracles.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using mfg::ConstraintSet;
using mfg::Matrix;
using mfg::Polyhedron;
using mfg::QpProblem;
using mfg::QpSettings;
using mfg::QpSolution;
using mfg::QpStatus;
using mfg::Vector;

namespace {

QpSettings tight_settings()
{
  QpSettings s;
  s.tol = 1e-9;
  return s;
}

}  // namespace

TEST_CASE("clipped unconstrained minimizer on a shifted box")
{
  // minimize x^2 over [1, 2]: unconstrained optimum 0 clips to the lower bound
  const QpProblem prob{Matrix::Identity(1, 1), Vector::Zero(1),
                       mfg::make_box(Vector::Ones(1), Vector::Constant(1, 2.0))};
  const QpSolution sol = mfg::solve_qp(prob);
  REQUIRE(sol.status == QpStatus::solved);
  CHECK(sol.x(0) == Catch::Approx(1.0).margin(1e-7));
  CHECK(sol.objective == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("symmetric simplex problem lands on the centroid")
{
  Matrix g(3, 2);
  g << 1.0, 1.0, 1.0, 0.0, 0.0, 1.0;
  Vector l(3);
  Vector u(3);
  l << 1.0, 0.0, 0.0;
  u << 1.0, mfg::kInf, mfg::kInf;
  const QpProblem prob{Matrix::Identity(2, 2), Vector::Constant(2, -1.0),
                       mfg::make_polyhedron(g, l, u)};
  const QpSolution sol = mfg::solve_qp(prob);
  REQUIRE(sol.status == QpStatus::solved);
  CHECK(sol.x(0) == Catch::Approx(0.5).margin(1e-7));
  CHECK(sol.x(1) == Catch::Approx(0.5).margin(1e-7));
}

TEST_CASE("random problems match the enumeration oracle")
{
  mfg::CounterRng rng(101);
  const mfg::QpSolver solver(tight_settings());
  for (int trial = 0; trial < 120; ++trial) {
    const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng);
    const std::optional<Vector> ref = oracle::brute_force_qp(inst.H, inst.f, inst.poly);
    REQUIRE(ref.has_value());

    const QpSolution sol = solver.solve(QpProblem{inst.H, inst.f, ConstraintSet{inst.poly}});
    REQUIRE(sol.status == QpStatus::solved);
    INFO("trial " << trial);
    CHECK((sol.x - *ref).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("solved status implies residuals within tolerance and membership")
{
  mfg::CounterRng rng(103);
  QpSettings s;
  s.tol = 1e-8;
  const mfg::QpSolver solver(s);
  for (int trial = 0; trial < 60; ++trial) {
    const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng);
    const QpSolution sol = solver.solve(QpProblem{inst.H, inst.f, ConstraintSet{inst.poly}});
    REQUIRE(sol.status == QpStatus::solved);
    CHECK(sol.primal_residual <= s.tol * 10.0);
    CHECK(sol.dual_residual <= s.tol * 10.0);
    CHECK(mfg::contains(ConstraintSet{inst.poly}, sol.x, s.tol_feas));
  }
}

TEST_CASE("weighted projection basics")
{
  const ConstraintSet box = mfg::make_box(Vector::Zero(2), Vector::Ones(2));
  const Matrix id = Matrix::Identity(2, 2);

  Vector inside(2);
  inside << 0.25, 0.75;
  CHECK((mfg::weighted_projection(id, inside, box) - inside).lpNorm<Eigen::Infinity>() <= 1e-7);

  Vector outside(2);
  outside << 2.0, -1.0;
  Vector clipped(2);
  clipped << 1.0, 0.0;
  CHECK((mfg::weighted_projection(id, outside, box) - clipped).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("metric weighting tilts the projection")
{
  // project the origin onto \{ x0 + x1 = 1, x >= 0 \} under P = diag(1, 10):
  // the cheap coordinate absorbs most of the move
  const ConstraintSet simplex = mfg::make_budget_box(Vector::Zero(2), Vector::Ones(2), Vector::Ones(2), 1.0);
  Matrix p(2, 2);
  p << 1.0, 0.0, 0.0, 10.0;
  const Vector proj = mfg::weighted_projection(p, Vector::Zero(2), simplex, tight_settings());
  CHECK(proj(0) == Catch::Approx(10.0 / 11.0).margin(1e-7));
  CHECK(proj(1) == Catch::Approx(1.0 / 11.0).margin(1e-7));

  const Vector ref = oracle::project(p, Vector::Zero(2), simplex);
  CHECK((proj - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("projection is idempotent and firmly nonexpansive")
{
  mfg::CounterRng rng(107);
  const mfg::QpSolver solver(tight_settings());
  for (int trial = 0; trial < 50; ++trial) {
    const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng, 4, 2);
    const Eigen::Index n = inst.H.rows();
    const Matrix p = oracle::random_psd(rng, n, 0.3);
    const ConstraintSet set{inst.poly};

    const Vector v = oracle::random_vector(rng, n, -3.0, 3.0);
    const Vector w = oracle::random_vector(rng, n, -3.0, 3.0);
    const Vector pv = mfg::weighted_projection(p, v, set, solver);
    const Vector pw = mfg::weighted_projection(p, w, set, solver);

    const Vector ppv = mfg::weighted_projection(p, pv, set, solver);
    CHECK((ppv - pv).lpNorm<Eigen::Infinity>() <= 1e-6);

    // firm nonexpansiveness in the P inner product
    const double lhs = (pv - pw).dot(p * (pv - pw));
    const double rhs = (v - w).dot(p * (pv - pw));
    CHECK(lhs <= rhs + 1e-7);
  }
}

TEST_CASE("projection satisfies the variational inequality against feasible points")
{
  mfg::CounterRng rng(109);
  const mfg::QpSolver solver(tight_settings());
  for (int trial = 0; trial < 30; ++trial) {
    const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng, 4, 2);
    const Eigen::Index n = inst.H.rows();
    const Matrix p = oracle::random_psd(rng, n, 0.3);
    const ConstraintSet set{inst.poly};
    const Vector v = oracle::random_vector(rng, n, -3.0, 3.0);
    const Vector pv = mfg::weighted_projection(p, v, set, solver);

    for (int k = 0; k < 5; ++k) {
      // oracle-projected random point is feasible by construction
      const Vector y = oracle::project(p, oracle::random_vector(rng, n, -2.0, 2.0), set);
      CHECK((v - pv).dot(p * (y - pv)) <= 1e-6);
    }
  }
}

TEST_CASE("splitting step norms are non-increasing while the step size is fixed")
{
  mfg::CounterRng rng(113);
  QpSettings s;
  s.adaptive_rho = false;
  s.record_merit = true;
  s.polish = false;
  s.tol = 1e-10;
  const mfg::QpSolver solver(s);
  for (int trial = 0; trial < 10; ++trial) {
    const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng);
    const QpSolution sol = solver.solve(QpProblem{inst.H, inst.f, ConstraintSet{inst.poly}});
    REQUIRE(sol.merit_trace.size() >= 2);
    for (std::size_t k = 1; k < sol.merit_trace.size(); ++k) {
      CHECK(sol.merit_trace[k] <= sol.merit_trace[k - 1] + 1e-12 * (1.0 + sol.merit_trace[k - 1]));
    }
  }
}

TEST_CASE("infeasible problems are classified, not silently capped")
{
  Matrix g(2, 1);
  g << 1.0, 1.0;
  Vector l(2);
  Vector u(2);
  l << 0.0, 0.6;
  u << 0.4, 1.0;
  const QpProblem prob{Matrix::Identity(1, 1), Vector::Zero(1), ConstraintSet{Polyhedron{g, l, u}}};
  const QpSolution sol = mfg::QpSolver().solve(prob);
  CHECK(sol.status == QpStatus::infeasible);

  const ConstraintSet over_budget =
      mfg::make_budget_box(Vector::Zero(2), Vector::Ones(2), Vector::Ones(2), 3.0);
  const QpSolution sol2 = mfg::QpSolver().solve(
      QpProblem{Matrix::Identity(2, 2), Vector::Zero(2), over_budget});
  CHECK(sol2.status == QpStatus::infeasible);
}

TEST_CASE("objective value is reported in the caller's convention")
{
  // J(x) = x'Hx + 2 f'x, not the scaled internal form
  mfg::CounterRng rng(127);
  const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng);
  const QpSolution sol = mfg::solve_qp(QpProblem{inst.H, inst.f, ConstraintSet{inst.poly}});
  REQUIRE(sol.status == QpStatus::solved);
  const double direct = sol.x.dot(inst.H * sol.x) + 2.0 * inst.f.dot(sol.x);
  CHECK(sol.objective == Catch::Approx(direct).margin(1e-12 * (1.0 + std::abs(direct))));
}

TEST_CASE("solver rejects malformed objectives")
{
  const ConstraintSet box = mfg::make_box(Vector::Zero(2), Vector::Ones(2));
  Matrix asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(mfg::solve_qp(QpProblem{asym, Vector::Zero(2), box}), std::invalid_argument);

  Matrix psd_only(2, 2);
  psd_only << 1.0, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(mfg::solve_qp(QpProblem{psd_only, Vector::Zero(2), box}), std::invalid_argument);

  CHECK_THROWS_AS(mfg::solve_qp(QpProblem{Matrix::Identity(3, 3), Vector::Zero(3), box}),
                  std::invalid_argument);
}

TEST_CASE("determinism: identical inputs give bit-identical solutions")
{
  mfg::CounterRng rng(131);
  const oracle::RandomQpInstance inst = oracle::random_qp_instance(rng);
  const QpProblem prob{inst.H, inst.f, ConstraintSet{inst.poly}};
  const QpSolution a = mfg::solve_qp(prob);
  const QpSolution b = mfg::solve_qp(prob);
  REQUIRE(a.status == QpStatus::solved);
  CHECK(a.x == b.x);
  CHECK(a.dual == b.dual);
  CHECK(a.iterations == b.iterations);
}
