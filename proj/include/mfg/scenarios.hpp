#pragma once

/// @file
/// Scenario builders. The LQ tracking game condenses a linear system over a
/// horizon into the quadratic game data on y = [s_1..s_T, u_0..u_{T-1}];
/// production planning and fleet charging are parameterized instances with
/// seeded heterogeneous agents.

#include "mfg/game.hpp"
#include "mfg/rng.hpp"
#include "mfg/sets.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace mfg {

struct LqAgentSpec
{
  Matrix A;  // p x p
  Matrix B;  // p x m
  Vector s0;
  std::vector<Box> state_boxes;  // one per step, bounds on s_1..s_T
  std::vector<Box> input_boxes;  // one per step, bounds on u_0..u_{T-1}
  double weight = 1.0;
};

/// Shared data of the LQ tracking game
///
///   sum_t ||s_{t+1} - gamma (eta + z_{t+1})||^2_{Q_{t+1}} + ||u_t||^2_{R_t}
///
/// with per-agent dynamics s_{t+1} = A^i s_t + B^i u_t as equality rows.
struct LqSpec
{
  int horizon = 1;            // T
  Eigen::Index state_dim = 1; // p
  Eigen::Index input_dim = 1; // m
  std::vector<Matrix> Q;      // T entries, weights on s_1..s_T, each positive definite
  std::vector<Matrix> R;      // T entries, weights on u_0..u_{T-1}, each positive definite
  Vector eta;
  double gamma = 0.0;
  std::vector<LqAgentSpec> agents;
  double a_bar = 1.0;
};

namespace detail {

inline void validate_lq_spec(const LqSpec& spec)
{
  const int T = spec.horizon;
  const Eigen::Index p = spec.state_dim;
  const Eigen::Index m = spec.input_dim;
  if (T < 1 || p < 1 || m < 1) { throw std::invalid_argument("lq: horizon and dimensions must be positive"); }
  if (static_cast<int>(spec.Q.size()) != T || static_cast<int>(spec.R.size()) != T) {
    throw std::invalid_argument("lq: need one Q and one R per step");
  }
  for (const Matrix& q : spec.Q) {
    if (q.rows() != p || q.cols() != p) { throw std::invalid_argument("lq: Q block shape mismatch"); }
    if (psd_check(q).kind != Definiteness::positive_definite) {
      throw std::invalid_argument("lq: state weights must be positive definite");
    }
  }
  for (const Matrix& r : spec.R) {
    if (r.rows() != m || r.cols() != m) { throw std::invalid_argument("lq: R block shape mismatch"); }
    if (psd_check(r).kind != Definiteness::positive_definite) {
      throw std::invalid_argument("lq: input weights must be positive definite");
    }
  }
  if (spec.eta.size() != p) { throw std::invalid_argument("lq: eta dimension mismatch"); }
  if (spec.agents.empty()) { throw std::invalid_argument("lq: needs at least one agent"); }
  int idx = 0;
  for (const LqAgentSpec& a : spec.agents) {
    std::ostringstream tag;
    tag << "lq agent " << idx;
    if (a.A.rows() != p || a.A.cols() != p || a.B.rows() != p || a.B.cols() != m || a.s0.size() != p) {
      throw std::invalid_argument(tag.str() + ": dynamics shape mismatch");
    }
    if (static_cast<int>(a.state_boxes.size()) != T || static_cast<int>(a.input_boxes.size()) != T) {
      throw std::invalid_argument(tag.str() + ": need one state box and one input box per step");
    }
    for (const Box& b : a.state_boxes) {
      if (b.lower.size() != p || b.upper.size() != p) {
        throw std::invalid_argument(tag.str() + ": state box dimension mismatch");
      }
    }
    for (const Box& b : a.input_boxes) {
      if (b.lower.size() != m || b.upper.size() != m) {
        throw std::invalid_argument(tag.str() + ": input box dimension mismatch");
      }
    }
    ++idx;
  }
}

}  // namespace detail

/// Dynamics equality rows plus state and input box rows for one agent, in
/// the condensed coordinates y = [s_1..s_T, u_0..u_{T-1}].
inline ConstraintSet lq_agent_constraint(const LqSpec& spec, const LqAgentSpec& a)
{
  const int T = spec.horizon;
  const Eigen::Index p = spec.state_dim;
  const Eigen::Index m = spec.input_dim;
  const Eigen::Index ns = p * T;
  const Eigen::Index nu = m * T;
  const Eigen::Index n = ns + nu;
  const Eigen::Index rows = ns + ns + nu;  // dynamics, state boxes, input boxes

  Matrix g = Matrix::Zero(rows, n);
  Vector l(rows);
  Vector u(rows);

  for (int t = 0; t < T; ++t) {
    const Eigen::Index r0 = p * t;
    g.block(r0, p * t, p, p) = Matrix::Identity(p, p);     // s_{t+1}
    if (t > 0) { g.block(r0, p * (t - 1), p, p) = -a.A; }  // -A s_t
    g.block(r0, ns + m * t, p, m) = -a.B;                  // -B u_t
    const Vector rhs = (t == 0) ? Vector(a.A * a.s0) : Vector(Vector::Zero(p));
    l.segment(r0, p) = rhs;
    u.segment(r0, p) = rhs;
  }
  for (int t = 0; t < T; ++t) {
    const Eigen::Index r0 = ns + p * t;
    g.block(r0, p * t, p, p) = Matrix::Identity(p, p);
    l.segment(r0, p) = a.state_boxes[static_cast<std::size_t>(t)].lower;
    u.segment(r0, p) = a.state_boxes[static_cast<std::size_t>(t)].upper;
  }
  for (int t = 0; t < T; ++t) {
    const Eigen::Index r0 = 2 * ns + m * t;
    g.block(r0, ns + m * t, m, m) = Matrix::Identity(m, m);
    l.segment(r0, m) = a.input_boxes[static_cast<std::size_t>(t)].lower;
    u.segment(r0, m) = a.input_boxes[static_cast<std::size_t>(t)].upper;
  }

  return make_polyhedron(std::move(g), std::move(l), std::move(u));
}

/// Condenses the LQ game into Population form. The broadcast signal lives in
/// the full decision space; only its state part enters the cost because the
/// tracking weights vanish on input coordinates.
inline Population build_lq_population(const LqSpec& spec)
{
  detail::validate_lq_spec(spec);
  const int T = spec.horizon;
  const Eigen::Index p = spec.state_dim;
  const Eigen::Index m = spec.input_dim;
  const Eigen::Index ns = p * T;
  const Eigen::Index n = ns + m * T;

  CostParams params;
  params.n = n;
  params.Q = Matrix::Zero(n, n);
  params.Delta = Matrix::Zero(n, n);
  params.c = Vector::Zero(n);
  for (int t = 0; t < T; ++t) {
    params.Delta.block(p * t, p * t, p, p) = spec.Q[static_cast<std::size_t>(t)];
    params.Q.block(ns + m * t, ns + m * t, m, m) = spec.R[static_cast<std::size_t>(t)];
    params.c.segment(p * t, p) = -spec.gamma * (spec.Q[static_cast<std::size_t>(t)] * spec.eta);
  }
  params.C = (1.0 - spec.gamma) * params.Delta;

  std::vector<Agent> agents;
  agents.reserve(spec.agents.size());
  int id = 0;
  for (const LqAgentSpec& a : spec.agents) {
    Agent agent;
    agent.id = id++;
    agent.weight = a.weight;
    agent.constraint = lq_agent_constraint(spec, a);
    agents.push_back(std::move(agent));
  }

  return make_population(std::move(params), std::move(agents), spec.a_bar);
}

/// Production planning: scalar inventory s_{t+1} = s_t + u_t, price linear
/// in the average inventory. Capacities sbar^i ~ U[0, 10) and ramps
/// ubar^i ~ U[0, sbar^i / 5) are drawn per agent in that order.
struct ProductionPlanningSpec
{
  int count = 2;
  std::uint64_t seed = 0;
  double p0 = 10.0;   // price intercept
  double rho = 1.0;   // price slope in the average inventory
  double r = 1.0;     // production cost weight
  int horizon = 20;
  double s0 = 0.0;
};

namespace detail {

inline LqAgentSpec production_planning_agent(const ProductionPlanningSpec& spec, double sbar, double ubar)
{
  LqAgentSpec a;
  a.A = Matrix::Identity(1, 1);
  a.B = Matrix::Identity(1, 1);
  a.s0 = Vector::Constant(1, spec.s0);
  a.state_boxes.assign(static_cast<std::size_t>(spec.horizon),
                       Box{Vector::Constant(1, 0.0), Vector::Constant(1, sbar)});
  a.input_boxes.assign(static_cast<std::size_t>(spec.horizon),
                       Box{Vector::Constant(1, -ubar), Vector::Constant(1, ubar)});
  return a;
}

}  // namespace detail

inline LqSpec production_planning_lq_spec(const ProductionPlanningSpec& spec)
{
  if (spec.count < 1) { throw std::invalid_argument("production planning: needs at least one agent"); }
  if (!(spec.rho > 0.0)) { throw std::invalid_argument("production planning: price slope must be positive"); }
  if (!(spec.r > 0.0)) { throw std::invalid_argument("production planning: production cost weight must be positive"); }

  LqSpec lq;
  lq.horizon = spec.horizon;
  lq.state_dim = 1;
  lq.input_dim = 1;
  lq.Q.assign(static_cast<std::size_t>(spec.horizon), Matrix::Identity(1, 1));
  lq.R.assign(static_cast<std::size_t>(spec.horizon), Matrix::Constant(1, 1, spec.r));
  lq.eta = Vector::Constant(1, -spec.p0 / spec.rho);
  lq.gamma = -spec.rho;
  lq.a_bar = 1.0;

  CounterRng rng(spec.seed);
  lq.agents.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    const double sbar = 10.0 * rng.next_uniform();
    const double ubar = (sbar / 5.0) * rng.next_uniform();
    lq.agents.push_back(detail::production_planning_agent(spec, sbar, ubar));
  }
  return lq;
}

inline Population build_production_planning(const ProductionPlanningSpec& spec)
{
  return build_lq_population(production_planning_lq_spec(spec));
}

/// The expected-constraint firm used to normalize equilibrium quality in the
/// population sweep: capacity 5 (the capacity draw's mean), ramp 1.
inline LqAgentSpec production_planning_homogeneous_agent(const ProductionPlanningSpec& spec)
{
  return detail::production_planning_agent(spec, 5.0, 1.0);
}

/// Fleet charging: T slots, per-agent energy budget gamma_i, slot caps U^i,
/// price a * (average charging) + demand. Cost data Q = 0, Delta = delta I,
/// C = a I, c = demand.
struct PevSpec
{
  int horizon = 12;
  double price_slope = 1.0;  // a
  double delta = 1e-4;
  Vector demand;                     // empty: default_demand_profile(horizon)
  std::vector<double> gammas;        // one per agent
  std::vector<Vector> upper_bounds;  // empty: all ones; one entry: shared
};

/// Stylized inflexible-demand profile with a mid-horizon valley:
/// c_t = 1 - 0.45 sin(pi (t + 1/2) / T).
inline Vector default_demand_profile(int horizon)
{
  if (horizon < 1) { throw std::invalid_argument("demand profile: horizon must be positive"); }
  Vector c(horizon);
  const double pi = 3.14159265358979323846;
  for (int t = 0; t < horizon; ++t) {
    c(t) = 1.0 - 0.45 * std::sin(pi * (static_cast<double>(t) + 0.5) / static_cast<double>(horizon));
  }
  return c;
}

/// Energy budgets gamma_i ~ U[lo, hi), drawn in agent order.
inline std::vector<double> pev_random_gammas(int count, std::uint64_t seed, double lo = 0.2, double hi = 0.8)
{
  if (count < 1) { throw std::invalid_argument("pev gammas: count must be positive"); }
  CounterRng rng(seed);
  std::vector<double> g(static_cast<std::size_t>(count));
  for (double& v : g) { v = rng.next_uniform(lo, hi); }
  return g;
}

inline Population build_pev_population(const PevSpec& spec)
{
  const int T = spec.horizon;
  if (T < 1) { throw std::invalid_argument("pev: horizon must be positive"); }
  if (!(spec.delta > 0.0)) { throw std::invalid_argument("pev: delta must be strictly positive"); }
  if (!(spec.price_slope > 0.0)) { throw std::invalid_argument("pev: price slope must be positive"); }
  if (spec.gammas.empty()) { throw std::invalid_argument("pev: needs at least one agent budget"); }

  Vector demand = (spec.demand.size() == 0) ? default_demand_profile(T) : spec.demand;
  if (demand.size() != T) { throw std::invalid_argument("pev: demand profile length mismatch"); }

  const std::size_t n_agents = spec.gammas.size();
  std::vector<Vector> caps;
  if (spec.upper_bounds.empty()) {
    caps.assign(n_agents, Vector::Ones(T));
  } else if (spec.upper_bounds.size() == 1) {
    caps.assign(n_agents, spec.upper_bounds.front());
  } else if (spec.upper_bounds.size() == n_agents) {
    caps = spec.upper_bounds;
  } else {
    throw std::invalid_argument("pev: upper bound count must be 1 or match the number of agents");
  }
  for (const Vector& cap : caps) {
    if (cap.size() != T) { throw std::invalid_argument("pev: slot cap length mismatch"); }
  }

  CostParams params;
  params.n = T;
  params.Q = Matrix::Zero(T, T);
  params.Delta = spec.delta * Matrix::Identity(T, T);
  params.C = spec.price_slope * Matrix::Identity(T, T);
  params.c = std::move(demand);

  std::vector<Agent> agents;
  agents.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    Agent agent;
    agent.id = static_cast<int>(i);
    agent.weight = 1.0;
    agent.constraint =
        make_budget_box(Vector::Zero(T), caps[i], Vector::Ones(T), spec.gammas[i]);
    agents.push_back(std::move(agent));
  }

  return make_population(std::move(params), std::move(agents), 1.0);
}

/// Slots carrying a non-negligible share of the aggregate charging.
inline std::vector<bool> active_charging_mask(const Vector& z, double rel_tol = 1e-6)
{
  const double thr = rel_tol * z.lpNorm<Eigen::Infinity>();
  std::vector<bool> mask(static_cast<std::size_t>(z.size()));
  for (Eigen::Index t = 0; t < z.size(); ++t) { mask[static_cast<std::size_t>(t)] = z(t) > thr; }
  return mask;
}

/// Spread of the effective price a z_t + c_t over the active slots; zero for
/// a perfectly valley-filling profile. Throws when no slot is active.
inline double valley_filling_gap(const Vector& z, double price_slope, const Vector& demand,
                                 const std::vector<bool>& active_mask)
{
  if (z.size() != demand.size() || static_cast<std::size_t>(z.size()) != active_mask.size()) {
    throw std::invalid_argument("valley_filling_gap: dimension mismatch");
  }
  double lo = kInf;
  double hi = -kInf;
  for (Eigen::Index t = 0; t < z.size(); ++t) {
    if (!active_mask[static_cast<std::size_t>(t)]) { continue; }
    const double price = price_slope * z(t) + demand(t);
    lo = std::min(lo, price);
    hi = std::max(hi, price);
  }
  if (!(hi >= lo)) { throw std::invalid_argument("valley_filling_gap: no active slot"); }
  return hi - lo;
}

/// Tail of a beta-discounted series with per-step bound L, cut at horizon T:
/// L beta^{T+1} / (1 - beta).
inline double discount_tail_bound(double per_step_bound, double beta, int horizon)
{
  if (!(per_step_bound >= 0.0)) { throw std::invalid_argument("discount_tail_bound: bound must be nonnegative"); }
  if (!(beta > 0.0 && beta < 1.0)) { throw std::invalid_argument("discount_tail_bound: beta must lie in (0, 1)"); }
  if (horizon < 0) { throw std::invalid_argument("discount_tail_bound: horizon must be nonnegative"); }
  return per_step_bound * std::pow(beta, horizon + 1) / (1.0 - beta);
}

}  // namespace mfg
