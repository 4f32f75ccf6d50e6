#pragma once

/// @file
/// Population model for the quadratic aggregative game: shared cost data
///
///   J(x, sigma) = ||x||_Q^2 + ||x - sigma||_Delta^2 + 2 (C sigma + c)' x
///
/// plus the agent list with weights and constraint sets.

#include "mfg/linalg.hpp"
#include "mfg/qp.hpp"
#include "mfg/sets.hpp"

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfg {

/// Shared quadratic cost data. Q and Delta are symmetric positive
/// semidefinite with Q + Delta positive definite; C may be asymmetric.
struct CostParams
{
  Eigen::Index n = 0;
  Matrix Q;
  Matrix Delta;
  Matrix C;
  Vector c;

  Matrix q_plus_delta() const { return Q + Delta; }
  Matrix delta_minus_c() const { return Delta - C; }
  Matrix c_symmetric() const { return 0.5 * (C + C.transpose()); }
};

inline void validate_cost_params(const CostParams& p, double tol_psd = -1.0)
{
  if (p.n <= 0) { throw std::invalid_argument("cost params: dimension must be positive"); }
  for (const Matrix* m : {&p.Q, &p.Delta, &p.C}) {
    if (m->rows() != p.n || m->cols() != p.n || !m->allFinite()) {
      throw std::invalid_argument("cost params: matrix shape mismatch or non-finite entries");
    }
  }
  if (p.c.size() != p.n || !p.c.allFinite()) {
    throw std::invalid_argument("cost params: offset vector shape mismatch or non-finite entries");
  }
  if (psd_check(p.Q, tol_psd).kind == Definiteness::indefinite) {
    throw std::invalid_argument("cost params: Q must be positive semidefinite");
  }
  if (psd_check(p.Delta, tol_psd).kind == Definiteness::indefinite) {
    throw std::invalid_argument("cost params: Delta must be positive semidefinite");
  }
  if (psd_check(p.q_plus_delta(), tol_psd).kind != Definiteness::positive_definite) {
    throw std::invalid_argument("cost params: Q + Delta must be positive definite");
  }
}

inline CostParams make_cost_params(Matrix q, Matrix delta, Matrix c_mat, Vector c_vec, double tol_psd = -1.0)
{
  CostParams p{q.rows(), std::move(q), std::move(delta), std::move(c_mat), std::move(c_vec)};
  validate_cost_params(p, tol_psd);
  return p;
}

/// Value of the shared cost at decision x against aggregate signal sigma.
inline double cost_value(const CostParams& p, const Vector& x, const Vector& sigma)
{
  if (x.size() != p.n || sigma.size() != p.n) { throw std::invalid_argument("cost_value: dimension mismatch"); }
  const Vector dev = x - sigma;
  return x.dot(p.Q * x) + dev.dot(p.Delta * dev) + 2.0 * (p.C * sigma + p.c).dot(x);
}

struct Agent
{
  int id = 0;
  double weight = 1.0;
  ConstraintSet constraint;
};

/// Agent collection sharing one CostParams. Weights satisfy
/// 0 <= a_i <= a_bar and sum_i a_i == N (within tol_sum).
struct Population
{
  CostParams params;
  std::vector<Agent> agents;
  double a_bar = 1.0;

  Eigen::Index dimension() const { return params.n; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(agents.size()); }
};

inline Population make_population(CostParams params, std::vector<Agent> agents, double a_bar,
                                  double tol_sum = 1e-9, double tol_feas = kTolFeas)
{
  validate_cost_params(params);
  if (agents.empty()) { throw std::invalid_argument("population: needs at least one agent"); }
  if (!(a_bar > 0.0) || !std::isfinite(a_bar)) {
    throw std::invalid_argument("population: weight cap must be positive and finite");
  }

  const double n_agents = static_cast<double>(agents.size());
  double weight_sum = 0.0;
  for (const Agent& a : agents) {
    if (!(a.weight >= 0.0) || a.weight > a_bar * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "population: agent " << a.id << " weight " << a.weight << " outside [0, " << a_bar << "]";
      throw std::invalid_argument(msg.str());
    }
    if (set_dimension(a.constraint) != params.n) {
      std::ostringstream msg;
      msg << "population: agent " << a.id << " constraint dimension mismatch";
      throw std::invalid_argument(msg.str());
    }
    weight_sum += a.weight;
  }
  if (std::abs(weight_sum - n_agents) > tol_sum * (1.0 + n_agents)) {
    std::ostringstream msg;
    msg << "population: weights sum to " << weight_sum << ", expected " << n_agents;
    throw std::invalid_argument(msg.str());
  }

  for (const Agent& a : agents) {
    const FeasibilityCertificate cert = feasibility_check(a.constraint, tol_feas);
    if (!cert.feasible) {
      std::ostringstream msg;
      msg << "population: agent " << a.id << " has an empty constraint set (violation "
          << cert.max_violation << ")";
      throw std::invalid_argument(msg.str());
    }
  }

  return Population{std::move(params), std::move(agents), a_bar};
}

}  // namespace mfg
