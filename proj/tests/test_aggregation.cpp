#include "mfg/aggregation.hpp"
#include "mfg/regularity.hpp"

#include "oracles.hpp"

#include "catch_amalgamated.hpp"

using mfg::Agent;
using mfg::AggregationEvaluation;
using mfg::AggregationEvaluator;
using mfg::AggregationOptions;
using mfg::ConstraintSet;
using mfg::CostParams;
using mfg::Matrix;
using mfg::Population;
using mfg::Vector;

namespace {

Population singleton_population(const Vector& point)
{
  const Eigen::Index n = point.size();
  const CostParams p{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n)};
  std::vector<Agent> agents;
  agents.push_back(Agent{0, 1.0, mfg::make_box(point, point)});
  return mfg::make_population(p, std::move(agents), 1.0);
}

}  // namespace

TEST_CASE("singleton sets make the aggregation constant")
{
  Vector xc(2);
  xc << 0.3, -0.8;
  const Population pop = singleton_population(xc);

  mfg::CounterRng rng(211);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector z = oracle::random_vector(rng, 2, -3.0, 3.0);
    const AggregationEvaluation eval = mfg::evaluate(pop, z);
    CHECK((eval.value - xc).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}

TEST_CASE("single agent population reduces to its response")
{
  mfg::CounterRng rng(223);
  const Population pop = oracle::random_population(rng, 2, 1, true);
  const mfg::ResponseContext ctx(pop.params);
  const Vector z = oracle::random_vector(rng, 2, -1.0, 1.0);

  const AggregationEvaluation eval = mfg::evaluate(pop, z);
  const Vector direct = ctx.optimal_response(pop.agents[0], z);
  CHECK((eval.value - direct).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("identical agents average to the shared response")
{
  mfg::CounterRng rng(227);
  const Eigen::Index n = 3;
  const CostParams params = oracle::random_cost_params(rng, n, true);
  const ConstraintSet box = mfg::make_box(Vector::Constant(n, -0.5), Vector::Constant(n, 0.5));

  std::vector<Agent> agents;
  for (int i = 0; i < 4; ++i) { agents.push_back(Agent{i, 1.0, box}); }
  const Population pop = mfg::make_population(params, std::move(agents), 1.0);

  const Vector z = oracle::random_vector(rng, n, -1.0, 1.0);
  const AggregationEvaluation eval = mfg::evaluate(pop, z);
  const Vector single = mfg::ResponseContext(params).optimal_response(pop.agents[0], z);
  // four equal weights: the pairwise tree sums and divides exactly
  CHECK(eval.value == single);
}

TEST_CASE("thread count never changes the result")
{
  mfg::CounterRng rng(229);
  const Population pop = oracle::random_population(rng, 3, 7, false);
  const Vector z = oracle::random_vector(rng, 3, -1.0, 1.0);

  AggregationOptions opts;
  opts.threads = 1;
  const AggregationEvaluation base = AggregationEvaluator(pop, opts).evaluate(z);
  for (int threads : {2, 3, 8}) {
    opts.threads = threads;
    const AggregationEvaluation eval = AggregationEvaluator(pop, opts).evaluate(z);
    CHECK(eval.value == base.value);
    CHECK(eval.qp_iterations == base.qp_iterations);
  }

  // and repeated evaluation is bit-stable
  opts.threads = 1;
  CHECK(AggregationEvaluator(pop, opts).evaluate(z).value == base.value);
}

TEST_CASE("aggregate lies in the weighted average of the agent sets")
{
  mfg::CounterRng rng(233);
  const Eigen::Index n = 2;
  const CostParams params = oracle::random_cost_params(rng, n, true);

  std::vector<Agent> agents;
  Vector lo_sum = Vector::Zero(n);
  Vector hi_sum = Vector::Zero(n);
  const int count = 5;
  for (int i = 0; i < count; ++i) {
    Vector lo = oracle::random_vector(rng, n, -1.0, 0.0);
    Vector hi = oracle::random_vector(rng, n, 0.1, 1.0);
    lo_sum += lo;
    hi_sum += hi;
    agents.push_back(Agent{i, 1.0, mfg::make_box(lo, hi)});
  }
  const Population pop = mfg::make_population(params, std::move(agents), 1.0);

  for (int trial = 0; trial < 8; ++trial) {
    const Vector z = oracle::random_vector(rng, n, -2.0, 2.0);
    const Vector a = mfg::evaluate(pop, z).value;
    // Minkowski average of boxes is the box of averaged bounds
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(a(j) >= lo_sum(j) / count - 1e-7);
      CHECK(a(j) <= hi_sum(j) / count + 1e-7);
    }
  }
}

TEST_CASE("nonexpansive populations contract distances empirically")
{
  mfg::CounterRng rng(239);
  int certified = 0;
  for (int attempt = 0; attempt < 12 && certified < 4; ++attempt) {
    const Population pop = oracle::random_population(rng, 2, 4, true);
    const mfg::RegularityReport rep = mfg::classify(pop.params);
    if (!rep.is_ne) { continue; }
    ++certified;

    const Matrix p = pop.params.q_plus_delta();
    for (int pair = 0; pair < 6; ++pair) {
      const Vector z = oracle::random_vector(rng, 2, -2.0, 2.0);
      const Vector v = oracle::random_vector(rng, 2, -2.0, 2.0);
      const Vector az = mfg::evaluate(pop, z).value;
      const Vector av = mfg::evaluate(pop, v).value;
      const double num = mfg::weighted_norm(Vector(az - av), p);
      const double den = mfg::weighted_norm(Vector(z - v), p);
      CHECK(num <= den + 1e-6);
    }
  }
  REQUIRE(certified >= 4);
}

TEST_CASE("agent failures carry the agent id")
{
  Vector xc(1);
  xc << 0.5;
  const Population pop = singleton_population(xc);

  AggregationOptions opts;
  opts.qp.max_iter = 1;           // starve the solver so the response cannot finish
  opts.qp.classify_failures = false;
  opts.qp.polish = false;

  try {
    AggregationEvaluator(pop, opts).evaluate(Vector::Zero(1));
    FAIL("expected AgentSolveError");
  } catch (const mfg::AgentSolveError& e) {
    CHECK(e.id == 0);
    CHECK(std::string(e.what()).find("agent 0") != std::string::npos);
  }
}

TEST_CASE("retained responses match the reduced value")
{
  mfg::CounterRng rng(241);
  const Population pop = oracle::random_population(rng, 2, 5, true);
  AggregationOptions opts;
  opts.retain_responses = true;
  const Vector z = oracle::random_vector(rng, 2, -1.0, 1.0);
  const AggregationEvaluation eval = AggregationEvaluator(pop, opts).evaluate(z);

  REQUIRE(eval.responses.size() == 5);
  Vector manual = Vector::Zero(2);
  for (std::size_t i = 0; i < eval.responses.size(); ++i) {
    manual += pop.agents[i].weight * eval.responses[i];
  }
  manual /= 5.0;
  CHECK((manual - eval.value).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("fixed point residual measures displacement in the chosen metric")
{
  Vector xc(2);
  xc << 1.0, -1.0;
  const Population pop = singleton_population(xc);
  const Matrix p = pop.params.q_plus_delta();

  CHECK(mfg::fixed_point_residual(pop, xc, p) <= 1e-6);

  Vector d(2);
  d << 0.3, 0.4;
  const double r = mfg::fixed_point_residual(pop, Vector(xc + d), p);
  CHECK(r == Catch::Approx(mfg::weighted_norm(d, p)).margin(1e-6));
}

TEST_CASE("dimension mismatches are rejected")
{
  Vector xc(2);
  xc << 0.0, 0.0;
  const Population pop = singleton_population(xc);
  CHECK_THROWS_AS(mfg::evaluate(pop, Vector::Zero(3)), std::invalid_argument);
}
