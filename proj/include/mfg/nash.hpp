#pragma once

/// @file
/// Equilibrium quality certificate. Given a candidate aggregate z_bar, each
/// agent's broadcast response is compared against its exact best response to
/// the other agents' fixed contribution; the worst cost gap is the epsilon
/// for which the response profile is an epsilon-Nash equilibrium.

#include "mfg/aggregation.hpp"
#include "mfg/game.hpp"
#include "mfg/regularity.hpp"
#include "mfg/response.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mfg {

struct AgentGap
{
  int id = 0;
  double j_broadcast = 0.0;   // cost of the response to z_bar at the realized aggregate
  double j_best = 0.0;        // cost of the exact best response at the same contribution
  double gap = 0.0;           // j_broadcast - j_best, kept raw (may be slightly negative)
};

struct NashCertificate
{
  Vector z_bar;
  Vector aggregate;           // A(z_bar), realized from the retained responses
  double residual = 0.0;      // || A(z_bar) - z_bar || in the configured metric
  MetricKind metric = MetricKind::q_plus_delta;
  std::vector<AgentGap> gaps;
  double epsilon = 0.0;       // max_i gap_i clamped at zero
  double max_raw_gap = 0.0;
  double min_raw_gap = 0.0;
};

struct NashOptions
{
  int threads = 1;
  MetricKind metric = MetricKind::q_plus_delta;
  QpSettings qp{};
};

/// Computes the certificate at z_bar. Gaps are nonnegative by construction
/// (the best deviation can only improve on the played strategy); negative
/// values beyond solver noise (about 2x the QP tolerance) indicate a solver
/// problem and are surfaced raw in the per-agent list.
inline NashCertificate epsilon_nash(const Population& pop, const Vector& z_bar, NashOptions opts = {})
{
  if (z_bar.size() != pop.dimension()) { throw std::invalid_argument("epsilon_nash: dimension mismatch"); }
  const double n_agents = static_cast<double>(pop.agents.size());

  AggregationOptions agg_opts;
  agg_opts.threads = opts.threads;
  agg_opts.retain_responses = true;
  agg_opts.qp = opts.qp;
  const AggregationEvaluator evaluator(pop, agg_opts);
  AggregationEvaluation eval = evaluator.evaluate(z_bar);

  const Metric metric(metric_matrix(pop.params, opts.metric));

  NashCertificate cert;
  cert.z_bar = z_bar;
  cert.aggregate = eval.value;
  cert.metric = opts.metric;
  cert.residual = metric.norm(eval.value - z_bar);
  cert.gaps.reserve(pop.agents.size());

  const ResponseContext& ctx = evaluator.context();
  QpSolver solver(opts.qp);

  // total = N * A(z_bar); subtracting an agent's own weighted response gives
  // the fixed contribution s_i of everyone else
  const Vector total = n_agents * eval.value;

  double max_gap = -kInf;
  double min_gap = kInf;
  for (std::size_t i = 0; i < pop.agents.size(); ++i) {
    const Agent& agent = pop.agents[i];
    const Vector& x_i = eval.responses[i];
    const double mu = agent.weight / n_agents;
    const Vector s_i = (total - agent.weight * x_i) / n_agents;

    const double j_broadcast = cost_value(pop.params, x_i, mu * x_i + s_i);
    const Vector x_best = ctx.best_response(agent, s_i, mu, solver);
    const double j_best = cost_value(pop.params, x_best, mu * x_best + s_i);

    AgentGap gap;
    gap.id = agent.id;
    gap.j_broadcast = j_broadcast;
    gap.j_best = j_best;
    gap.gap = j_broadcast - j_best;
    max_gap = std::max(max_gap, gap.gap);
    min_gap = std::min(min_gap, gap.gap);
    cert.gaps.push_back(gap);
  }

  cert.max_raw_gap = max_gap;
  cert.min_raw_gap = min_gap;
  cert.epsilon = std::max(0.0, max_gap);
  return cert;
}

}  // namespace mfg
