#include "mfg/game.hpp"

#include "oracles.hpp"

#include "catch_amalgamated.hpp"

using mfg::Agent;
using mfg::ConstraintSet;
using mfg::CostParams;
using mfg::Matrix;
using mfg::Vector;

namespace {

std::vector<Agent> unit_box_agents(int count, Eigen::Index n)
{
  std::vector<Agent> agents;
  for (int i = 0; i < count; ++i) {
    agents.push_back(Agent{i, 1.0, mfg::make_box(Vector::Zero(n), Vector::Ones(n))});
  }
  return agents;
}

}  // namespace

TEST_CASE("cost parameter validation enforces the definiteness contract")
{
  const Eigen::Index n = 2;
  CostParams good{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n)};
  CHECK_NOTHROW(mfg::validate_cost_params(good));

  // either block may be singular as long as the sum stays definite
  CostParams zero_q = good;
  zero_q.Q = Matrix::Zero(n, n);
  CHECK_NOTHROW(mfg::validate_cost_params(zero_q));

  CostParams indefinite_q = good;
  indefinite_q.Q(1, 1) = -1.0;
  CHECK_THROWS_WITH(mfg::validate_cost_params(indefinite_q),
                    Catch::Matchers::ContainsSubstring("Q must be positive semidefinite"));

  CostParams indefinite_delta = good;
  indefinite_delta.Delta(0, 0) = -0.5;
  CHECK_THROWS_WITH(mfg::validate_cost_params(indefinite_delta),
                    Catch::Matchers::ContainsSubstring("Delta must be positive semidefinite"));

  CostParams singular_sum = good;
  singular_sum.Q = Matrix::Zero(n, n);
  singular_sum.Delta = Matrix::Zero(n, n);
  singular_sum.Delta(0, 0) = 1.0;
  CHECK_THROWS_WITH(mfg::validate_cost_params(singular_sum),
                    Catch::Matchers::ContainsSubstring("positive definite"));

  CostParams bad_shape = good;
  bad_shape.C = Matrix::Zero(n, n + 1);
  CHECK_THROWS_AS(mfg::validate_cost_params(bad_shape), std::invalid_argument);

  CostParams bad_c = good;
  bad_c.c = Vector::Zero(n + 1);
  CHECK_THROWS_AS(mfg::validate_cost_params(bad_c), std::invalid_argument);
}

TEST_CASE("asymmetric coupling matrices are allowed")
{
  const Eigen::Index n = 2;
  Matrix c(2, 2);
  c << 0.0, 1.0, -1.0, 0.0;
  CHECK_NOTHROW(mfg::make_cost_params(Matrix::Identity(n, n), Matrix::Identity(n, n), c, Vector::Zero(n)));
}

TEST_CASE("cost value matches the expanded quadratic")
{
  mfg::CounterRng rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 4);
    const CostParams p = oracle::random_cost_params(rng, n, false);
    const Vector x = oracle::random_vector(rng, n, -2.0, 2.0);
    const Vector sigma = oracle::random_vector(rng, n, -2.0, 2.0);

    double expected = x.dot(p.Q * x);
    const Vector dev = x - sigma;
    expected += dev.dot(p.Delta * dev);
    expected += 2.0 * x.dot(p.C * sigma) + 2.0 * p.c.dot(x);

    CHECK(mfg::cost_value(p, x, sigma)
          == Catch::Approx(expected).margin(1e-12 * (1.0 + std::abs(expected))));
  }
}

TEST_CASE("population weights must average to one")
{
  const Eigen::Index n = 2;
  const CostParams p{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n)};

  std::vector<Agent> agents = unit_box_agents(3, n);
  CHECK_NOTHROW(mfg::make_population(p, agents, 1.0));

  agents[1].weight = 1.1;
  CHECK_THROWS_WITH(mfg::make_population(p, agents, 2.0),
                    Catch::Matchers::ContainsSubstring("weights sum to"));

  // redistribution that preserves the sum is fine under a loose cap
  agents[0].weight = 0.9;
  CHECK_NOTHROW(mfg::make_population(p, agents, 2.0));
}

TEST_CASE("weight bounds are per-agent")
{
  const Eigen::Index n = 1;
  const CostParams p{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n)};

  std::vector<Agent> agents = unit_box_agents(2, n);
  agents[0].weight = 1.5;
  agents[1].weight = 0.5;
  CHECK_THROWS_WITH(mfg::make_population(p, agents, 1.2),
                    Catch::Matchers::ContainsSubstring("agent 0"));
  CHECK_NOTHROW(mfg::make_population(p, agents, 1.5));

  agents[0].weight = -0.5;
  agents[1].weight = 2.5;
  CHECK_THROWS_AS(mfg::make_population(p, agents, 3.0), std::invalid_argument);
}

TEST_CASE("infeasible agents are rejected with their id")
{
  const Eigen::Index n = 2;
  const CostParams p{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n)};

  std::vector<Agent> agents = unit_box_agents(3, n);
  agents[2].id = 7;
  agents[2].constraint = mfg::make_budget_box(Vector::Zero(n), Vector::Ones(n), Vector::Ones(n), 5.0);
  CHECK_THROWS_WITH(mfg::make_population(p, agents, 1.0),
                    Catch::Matchers::ContainsSubstring("agent 7"));
}

TEST_CASE("population rejects dimension mismatches and empty agent lists")
{
  const Eigen::Index n = 2;
  const CostParams p{n, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n), Vector::Zero(n)};

  CHECK_THROWS_AS(mfg::make_population(p, {}, 1.0), std::invalid_argument);

  std::vector<Agent> agents = unit_box_agents(2, n);
  agents[1].constraint = mfg::make_box(Vector::Zero(3), Vector::Ones(3));
  CHECK_THROWS_WITH(mfg::make_population(p, agents, 1.0),
                    Catch::Matchers::ContainsSubstring("dimension mismatch"));
}

TEST_CASE("derived matrices")
{
  Matrix q(2, 2);
  q << 2.0, 0.0, 0.0, 1.0;
  Matrix delta(2, 2);
  delta << 1.0, 0.0, 0.0, 3.0;
  Matrix c(2, 2);
  c << 0.0, 1.0, 0.0, 0.0;
  const CostParams p{2, q, delta, c, Vector::Zero(2)};

  CHECK((p.q_plus_delta() - (q + delta)).norm() == 0.0);
  CHECK((p.delta_minus_c() - (delta - c)).norm() == 0.0);
  Matrix csym(2, 2);
  csym << 0.0, 0.5, 0.5, 0.0;
  CHECK((p.c_symmetric() - csym).norm() == 0.0);
}
