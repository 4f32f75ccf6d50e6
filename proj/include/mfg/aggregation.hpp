#pragma once

/// @file
/// Aggregation mapping A(z) = (1/N) sum_i a_i x_i*(z). Agent responses are
/// independent and may be solved on worker threads; the weighted sum is
/// always reduced in a fixed index-ordered pairwise tree so results are
/// bit-identical for any thread count.

#include "mfg/game.hpp"
#include "mfg/response.hpp"

#include <atomic>
#include <cstdint>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mfg {

struct AgentSolveError : std::runtime_error
{
  AgentSolveError(int agent_id, const std::string& what) : std::runtime_error(what), id(agent_id) {}
  int id;
};

struct AggregationOptions
{
  int threads = 1;
  bool retain_responses = false;
  QpSettings qp{};
};

struct AggregationEvaluation
{
  Vector z;
  Vector value;                    // A(z)
  std::vector<Vector> responses;   // populated when retain_responses is set
  std::int64_t qp_iterations = 0;  // summed over agents
};

namespace detail {

inline Vector weighted_pairwise_sum(const std::vector<Vector>& xs, const std::vector<double>& ws,
                                    std::size_t lo, std::size_t hi)
{
  if (hi - lo == 1) { return ws[lo] * xs[lo]; }
  const std::size_t mid = lo + (hi - lo) / 2;
  return weighted_pairwise_sum(xs, ws, lo, mid) + weighted_pairwise_sum(xs, ws, mid, hi);
}

}  // namespace detail

/// Evaluates A(z). Responses are computed agent-by-agent (optionally in
/// parallel, each worker owning its own solver) and reduced deterministically.
class AggregationEvaluator
{
public:
  explicit AggregationEvaluator(const Population& pop, AggregationOptions opts = {}, bool cross_check = false)
      : pop_(&pop), opts_(opts), ctx_(pop.params, cross_check, 2.0 * opts.qp.tol)
  {
  }

  const ResponseContext& context() const { return ctx_; }

  AggregationEvaluation evaluate(const Vector& z) const
  {
    const Population& pop = *pop_;
    if (z.size() != pop.dimension()) { throw std::invalid_argument("aggregation: dimension mismatch"); }
    const std::size_t n_agents = pop.agents.size();

    std::vector<Vector> responses(n_agents);
    std::vector<double> weights(n_agents);
    std::atomic<std::int64_t> qp_iters{0};

    const int threads = std::max(1, std::min<int>(opts_.threads, static_cast<int>(n_agents)));

    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    auto solve_range = [&](std::size_t lo, std::size_t hi) {
      QpSolver solver(opts_.qp);
      std::int64_t local_iters = 0;
      try {
        for (std::size_t i = lo; i < hi; ++i) {
          if (failed.load(std::memory_order_relaxed)) { return; }
          const Agent& agent = pop.agents[i];
          weights[i] = agent.weight;
          try {
            QpSolution sol = ctx_.optimal_response_solution(agent, z, solver);
            local_iters += sol.iterations;
            responses[i] = std::move(sol.x);
          } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "aggregation: agent " << agent.id << ": " << e.what();
            throw AgentSolveError(agent.id, msg.str());
          }
        }
      } catch (...) {
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true)) { first_error = std::current_exception(); }
      }
      qp_iters.fetch_add(local_iters, std::memory_order_relaxed);
    };

    if (threads == 1) {
      solve_range(0, n_agents);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      const std::size_t chunk = (n_agents + static_cast<std::size_t>(threads) - 1)
                              / static_cast<std::size_t>(threads);
      for (int t = 0; t < threads; ++t) {
        const std::size_t lo = static_cast<std::size_t>(t) * chunk;
        const std::size_t hi = std::min(n_agents, lo + chunk);
        if (lo >= hi) { break; }
        pool.emplace_back(solve_range, lo, hi);
      }
      for (std::thread& th : pool) { th.join(); }
    }

    if (failed.load()) { std::rethrow_exception(first_error); }

    AggregationEvaluation out;
    out.z = z;
    out.value = detail::weighted_pairwise_sum(responses, weights, 0, n_agents)
              / static_cast<double>(n_agents);
    out.qp_iterations = qp_iters.load();
    if (opts_.retain_responses) { out.responses = std::move(responses); }
    return out;
  }

private:
  const Population* pop_;
  AggregationOptions opts_;
  ResponseContext ctx_;
};

inline AggregationEvaluation evaluate(const Population& pop, const Vector& z, AggregationOptions opts = {})
{
  return AggregationEvaluator(pop, opts).evaluate(z);
}

/// || A(z) - z ||_P for a validated metric P.
inline double fixed_point_residual(const Population& pop, const Vector& z, const Matrix& metric,
                                   AggregationOptions opts = {})
{
  const AggregationEvaluation eval = evaluate(pop, z, opts);
  return weighted_norm(eval.value - z, metric);
}

}  // namespace mfg
