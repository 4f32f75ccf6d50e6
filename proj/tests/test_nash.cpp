#include "mfg/nash.hpp"

#include "mfg/iteration.hpp"
#include "mfg/scenarios.hpp"

#include "oracles.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using mfg::Agent;
using mfg::ConstraintSet;
using mfg::CostParams;
using mfg::Matrix;
using mfg::NashCertificate;
using mfg::NashOptions;
using mfg::Population;
using mfg::Vector;

namespace {

NashOptions tight_nash()
{
  NashOptions opts;
  opts.qp.tol = 1e-10;
  return opts;
}

Vector solve_to_fixed_point(const Population& pop, mfg::IterationKind kind, double tol)
{
  mfg::IterationConfig cfg;
  cfg.kind = kind;
  cfg.stop_tol_abs = tol;
  cfg.max_outer = 4000;
  cfg.record_z = false;
  cfg.qp.tol = 1e-10;
  const mfg::ConvergenceTrace trace = mfg::run(pop, cfg);
  REQUIRE(trace.status == mfg::RunStatus::converged);
  return trace.z_final;
}

}  // namespace

TEST_CASE("gaps are nonnegative up to solver noise")
{
  mfg::CounterRng rng(503);
  const NashOptions opts = tight_nash();
  for (int trial = 0; trial < 12; ++trial) {
    const Population pop = oracle::random_population(rng, 2, 4, true);
    const Vector z_bar = oracle::random_vector(rng, 2, -1.0, 1.0);
    NashCertificate cert;
    try {
      cert = mfg::epsilon_nash(pop, z_bar, opts);
    } catch (const mfg::DegenerateBestResponse&) {
      continue;  // draw without a well-posed deviation problem
    }
    CHECK(cert.min_raw_gap >= -2.0 * opts.qp.tol * 1e2);
    CHECK(cert.epsilon >= 0.0);
    CHECK(cert.epsilon == Catch::Approx(std::max(0.0, cert.max_raw_gap)));
    REQUIRE(cert.gaps.size() == 4);
  }
}

TEST_CASE("zero-weight agents cannot gain anything at a fixed point")
{
  // with weight zero the agent's own play never enters the aggregate, and at
  // a fixed point the contribution of the others equals the broadcast signal,
  // so the broadcast response already solves the deviation problem
  const Eigen::Index n = 2;
  const CostParams params{n, Matrix::Identity(n, n), Matrix::Identity(n, n),
                          0.2 * Matrix::Identity(n, n), Vector::Ones(n)};
  std::vector<Agent> agents;
  agents.push_back(Agent{0, 0.0, mfg::make_box(Vector::Constant(n, -1.0), Vector::Ones(n))});
  agents.push_back(Agent{1, 2.0, mfg::make_box(Vector::Constant(n, -2.0), Vector::Constant(n, 2.0))});
  const Population pop = mfg::make_population(params, std::move(agents), 2.0);

  const Vector z_bar = solve_to_fixed_point(pop, mfg::IterationKind::picard, 1e-9);
  const NashCertificate cert = mfg::epsilon_nash(pop, z_bar, tight_nash());
  REQUIRE(cert.gaps.size() == 2);
  CHECK(cert.gaps[0].id == 0);
  CHECK(std::abs(cert.gaps[0].gap) <= 2e-8);
}

TEST_CASE("certificate costs agree with an independent tally")
{
  mfg::CounterRng rng(509);
  const Population pop = oracle::random_population(rng, 2, 5, true);
  const Vector z_bar = oracle::random_vector(rng, 2, -0.5, 0.5);
  const NashCertificate cert = mfg::epsilon_nash(pop, z_bar, tight_nash());

  // recompute every response and every contribution from scratch
  const mfg::ResponseContext ctx(pop.params);
  mfg::QpSettings qs;
  qs.tol = 1e-10;
  const mfg::QpSolver solver(qs);
  const double n_agents = static_cast<double>(pop.agents.size());

  std::vector<Vector> responses;
  for (const Agent& a : pop.agents) { responses.push_back(ctx.optimal_response(a, z_bar, solver)); }

  for (std::size_t i = 0; i < pop.agents.size(); ++i) {
    Vector others = Vector::Zero(pop.dimension());
    for (std::size_t j = 0; j < pop.agents.size(); ++j) {
      if (j != i) { others += pop.agents[j].weight * responses[j]; }
    }
    const Vector s_i = others / n_agents;
    const double mu = pop.agents[i].weight / n_agents;
    const Vector sigma = mu * responses[i] + s_i;
    const double j_broadcast = mfg::cost_value(pop.params, responses[i], sigma);
    CHECK(cert.gaps[i].j_broadcast
          == Catch::Approx(j_broadcast).margin(1e-9 * (1.0 + std::abs(j_broadcast))));
  }

  // aggregate and residual are consistent with the returned responses
  Vector agg = Vector::Zero(pop.dimension());
  for (std::size_t j = 0; j < pop.agents.size(); ++j) { agg += pop.agents[j].weight * responses[j]; }
  agg /= n_agents;
  CHECK((cert.aggregate - agg).lpNorm<Eigen::Infinity>() <= 1e-8);
  const Matrix p = mfg::metric_matrix(pop.params, cert.metric);
  CHECK(cert.residual == Catch::Approx(mfg::weighted_norm(Vector(agg - z_bar), p)).margin(1e-8));
}

TEST_CASE("fixed points of singleton populations are exact equilibria")
{
  const Eigen::Index n = 2;
  Vector xc(n);
  xc << 0.25, -0.75;
  const CostParams params{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n),
                          Vector::Zero(n)};
  std::vector<Agent> agents;
  agents.push_back(Agent{0, 1.0, mfg::make_box(xc, xc)});
  const Population pop = mfg::make_population(params, std::move(agents), 1.0);

  const NashCertificate cert = mfg::epsilon_nash(pop, xc, tight_nash());
  CHECK(cert.epsilon <= 1e-8);
  CHECK(cert.residual <= 1e-8);
}

TEST_CASE("equilibrium quality improves as the population grows")
{
  double prev = mfg::kInf;
  for (int count : {4, 16, 64}) {
    mfg::ProductionPlanningSpec spec;
    spec.count = count;
    spec.seed = 11;
    spec.horizon = 12;
    const Population pop = mfg::build_production_planning(spec);

    const Vector z_bar = solve_to_fixed_point(pop, mfg::IterationKind::krasnoselskij, 1e-8);
    const NashCertificate cert = mfg::epsilon_nash(pop, z_bar, tight_nash());
    CHECK(cert.epsilon < prev);
    prev = cert.epsilon;
  }
}

TEST_CASE("certificates reject candidates of the wrong dimension")
{
  mfg::CounterRng rng(521);
  const Population pop = oracle::random_population(rng, 2, 2, true);
  CHECK_THROWS_AS(mfg::epsilon_nash(pop, Vector::Zero(3)), std::invalid_argument);
}
