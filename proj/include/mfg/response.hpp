#pragma once

/// @file
/// Single-agent responses to a broadcast aggregate signal z:
///
///  - unconstrained optimizer xhat(z) = (Q+Delta)^{-1} ((Delta - C) z - c)
///  - optimal response: projection of xhat(z) onto the agent set in the
///    (Q+Delta)-weighted norm, equivalently the direct QP over the set
///  - exact best response against the other agents' fixed contribution s,
///    accounting for the agent's own mu = a_i / N share of the aggregate.

#include "mfg/game.hpp"
#include "mfg/qp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mfg {

struct DegenerateBestResponse : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Caches the (Q+Delta) factorization and the affine map of the
/// unconstrained optimizer so per-iteration response solves stay cheap.
class ResponseContext
{
public:
  explicit ResponseContext(CostParams params, bool cross_check = false, double cross_check_tol = 2e-8)
      : params_(std::move(params)), cross_check_(cross_check), cross_check_tol_(cross_check_tol)
  {
    validate_cost_params(params_);
    q_plus_delta_ = params_.q_plus_delta();
    llt_.compute(q_plus_delta_);
    if (llt_.info() != Eigen::Success) {
      throw std::invalid_argument("response context: Q + Delta must be positive definite");
    }
    gain_ = llt_.solve(params_.delta_minus_c());
    offset_ = -llt_.solve(params_.c);
  }

  const CostParams& params() const { return params_; }
  const Matrix& q_plus_delta() const { return q_plus_delta_; }
  bool cross_check() const { return cross_check_; }

  /// xhat(z): minimizer of x -> J(x, z) over all of R^n.
  Vector unconstrained_optimizer(const Vector& z) const
  {
    if (z.size() != params_.n) { throw std::invalid_argument("unconstrained_optimizer: dimension mismatch"); }
    return gain_ * z + offset_;
  }

  /// argmin_{x in X_i} J(x, z); the weighted projection of xhat(z). With
  /// cross-check enabled the direct QP is solved as well and both paths must
  /// agree within the configured tolerance.
  QpSolution optimal_response_solution(const Agent& agent, const Vector& z, const QpSolver& solver) const
  {
    const Vector xhat = unconstrained_optimizer(z);
    QpSolution sol = solver.solve(QpProblem{q_plus_delta_, -(q_plus_delta_ * xhat), agent.constraint});
    if (sol.status != QpStatus::solved) {
      std::ostringstream msg;
      msg << "optimal_response: agent " << agent.id << ": " << to_string(sol.status);
      throw QpFailure(sol.status, msg.str());
    }
    if (cross_check_) {
      // direct path: linear term assembled from the cost data instead of xhat
      const Vector f_direct = (params_.C - params_.Delta) * z + params_.c;
      QpSolution direct = solver.solve(QpProblem{q_plus_delta_, f_direct, agent.constraint});
      if (direct.status != QpStatus::solved) {
        std::ostringstream msg;
        msg << "optimal_response: agent " << agent.id << " cross-check: " << to_string(direct.status);
        throw QpFailure(direct.status, msg.str());
      }
      const double gap = (sol.x - direct.x).lpNorm<Eigen::Infinity>();
      if (gap > cross_check_tol_ * (1.0 + sol.x.lpNorm<Eigen::Infinity>())) {
        std::ostringstream msg;
        msg << "optimal_response: agent " << agent.id << " projection and direct paths disagree by " << gap;
        throw std::runtime_error(msg.str());
      }
      sol.iterations += direct.iterations;
    }
    return sol;
  }

  Vector optimal_response(const Agent& agent, const Vector& z, const QpSolver& solver) const
  {
    return std::move(optimal_response_solution(agent, z, solver).x);
  }

  Vector optimal_response(const Agent& agent, const Vector& z) const
  {
    return optimal_response(agent, z, QpSolver{});
  }

  /// Exact best response when the rest of the population contributes s and
  /// this agent holds a mu share of the aggregate:
  ///
  ///   argmin_{y in X_i} J(y, mu y + s)
  ///
  /// which is a QP with  H_eff = Q + (1-mu)^2 Delta + mu (C + C'),
  ///                     f_eff = -(1-mu) Delta s + C s + c.
  Vector best_response(const Agent& agent, const Vector& s, double mu, const QpSolver& solver) const
  {
    if (s.size() != params_.n) { throw std::invalid_argument("best_response: dimension mismatch"); }
    if (!(mu >= 0.0 && mu <= 1.0)) { throw std::invalid_argument("best_response: mu must lie in [0, 1]"); }

    const double om = 1.0 - mu;
    const Matrix h_eff = params_.Q + (om * om) * params_.Delta + mu * (params_.C + params_.C.transpose());
    if (!cholesky_pd_quick(h_eff)) {
      std::ostringstream msg;
      msg << "best_response: agent " << agent.id << ": effective Hessian is not positive definite";
      throw DegenerateBestResponse(msg.str());
    }
    const Vector f_eff = -om * (params_.Delta * s) + params_.C * s + params_.c;

    QpSolution sol = solver.solve(QpProblem{h_eff, f_eff, agent.constraint});
    if (sol.status != QpStatus::solved) {
      std::ostringstream msg;
      msg << "best_response: agent " << agent.id << ": " << to_string(sol.status);
      throw QpFailure(sol.status, msg.str());
    }
    return std::move(sol.x);
  }

  Vector best_response(const Agent& agent, const Vector& s, double mu) const
  {
    return best_response(agent, s, mu, QpSolver{});
  }

private:
  CostParams params_;
  bool cross_check_;
  double cross_check_tol_;
  Matrix q_plus_delta_;
  Eigen::LLT<Matrix> llt_;
  Matrix gain_;
  Vector offset_;
};

}  // namespace mfg
