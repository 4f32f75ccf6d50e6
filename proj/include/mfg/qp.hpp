#pragma once

/// @file
/// Dense convex QP solver for problems
///
///   minimize    x' H x + 2 f' x
///   subject to  l <= G x <= u
///
/// with H symmetric positive definite. Operator-splitting (ADMM) iteration
/// with a cached KKT factorization, residual-balancing rho adaptation and an
/// active-set polish step for high-accuracy solutions. Also hosts the
/// weighted projection and the phase-1 feasibility check built on top of it.

#include "mfg/linalg.hpp"
#include "mfg/sets.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mfg {

enum class QpStatus { solved, max_iterations, infeasible };

inline const char* to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::solved: return "solved";
    case QpStatus::max_iterations: return "max_iterations";
    case QpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

struct QpProblem
{
  Matrix H;
  Vector f;
  ConstraintSet set;
};

struct QpSolution
{
  Vector x;
  Vector dual;  // row multipliers, same sign convention as OSQP (y > 0: upper bound)
  int iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
  double objective = 0.0;
  bool polished = false;
  QpStatus status = QpStatus::max_iterations;
  std::vector<double> merit_trace;  // per-iteration splitting step norms when recorded
};

struct QpSettings
{
  double tol = 1e-8;   // absolute and relative KKT tolerance
  int max_iter = 20000;
  double rho = 0.1;    // initial step; equality rows get rho * equality_rho_scale
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  bool polish = true;
  bool adaptive_rho = true;
  double equality_rho_scale = 1e3;
  int check_interval = 10;
  double tol_feas = kTolFeas;
  // When a solve stalls or certifies infeasibility, run the phase-1 check to
  // classify; disabled inside the phase-1 solve itself to stop recursion.
  bool classify_failures = true;
  // Record the splitting iterate's step norm each iteration. The underlying
  // operator is averaged in (x, z + y/rho) weighted by (sigma, rho), so the
  // recorded sequence is non-increasing while rho stays fixed.
  bool record_merit = false;
};

struct QpFailure : std::runtime_error
{
  QpFailure(QpStatus s, const std::string& what) : std::runtime_error(what), status(s) {}
  QpStatus status;
};

class QpSolver
{
public:
  QpSolver() = default;
  explicit QpSolver(QpSettings settings) : settings_(settings) {}

  const QpSettings& settings() const { return settings_; }
  QpSettings& settings() { return settings_; }

  QpSolution solve(const QpProblem& prob) const;

private:
  QpSettings settings_{};
};

namespace detail {

/// Equality-constrained KKT solve on the rows the ADMM duals mark active,
/// with light regularization and two rounds of iterative refinement. Returns
/// true and overwrites (x, y) when the polished pair has strictly smaller
/// worst-case KKT residual.
inline bool polish_solution(const Matrix& p_orig, const Vector& q_orig, const Polyhedron& poly,
                            Vector& x, Vector& y, double& rp, double& rd)
{
  const Eigen::Index n = p_orig.rows();
  const Eigen::Index m = poly.G.rows();

  const double y_guard = 1e-14 * (1.0 + y.lpNorm<Eigen::Infinity>());
  const Vector gx = poly.G * x;

  std::vector<Eigen::Index> rows;
  std::vector<double> rhs_b;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool eq = (poly.l(i) == poly.u(i));
    double bound = 0.0;
    if (eq) {
      bound = poly.l(i);
    } else if (y(i) < -y_guard && std::isfinite(poly.l(i))) {
      bound = poly.l(i);
    } else if (y(i) > y_guard && std::isfinite(poly.u(i))) {
      bound = poly.u(i);
    } else {
      continue;
    }
    // guard against dual noise pinning a row that is far from its bound
    if (!eq && std::abs(gx(i) - bound) > 1e-4 * (1.0 + std::abs(bound))) { continue; }
    rows.push_back(i);
    rhs_b.push_back(bound);
  }

  const Eigen::Index na = static_cast<Eigen::Index>(rows.size());
  Matrix ga(na, n);
  Vector b(na);
  for (Eigen::Index k = 0; k < na; ++k) {
    ga.row(k) = poly.G.row(rows[static_cast<std::size_t>(k)]);
    b(k) = rhs_b[static_cast<std::size_t>(k)];
  }

  const double reg = 1e-9;
  Matrix kkt = Matrix::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) = p_orig;
  kkt.topLeftCorner(n, n).diagonal().array() += reg;
  if (na > 0) {
    kkt.topRightCorner(n, na) = ga.transpose();
    kkt.bottomLeftCorner(na, n) = ga;
    kkt.bottomRightCorner(na, na).diagonal().array() -= reg;
  }
  Eigen::PartialPivLU<Matrix> lu(kkt);

  Vector rhs(n + na);
  rhs.head(n) = -q_orig;
  rhs.tail(na) = b;
  Vector sol = lu.solve(rhs);
  for (int refine = 0; refine < 2; ++refine) {
    Vector resid(n + na);
    resid.head(n) = -q_orig - (p_orig * sol.head(n) + (na > 0 ? Vector(ga.transpose() * sol.tail(na)) : Vector::Zero(n)));
    resid.tail(na) = b - ga * sol.head(n);
    sol += lu.solve(resid);
  }

  Vector x_p = sol.head(n);
  Vector y_p = Vector::Zero(m);
  for (Eigen::Index k = 0; k < na; ++k) { y_p(rows[static_cast<std::size_t>(k)]) = sol(n + k); }

  const Vector gx_p = poly.G * x_p;
  double rp_p = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(poly.l(i))) { rp_p = std::max(rp_p, poly.l(i) - gx_p(i)); }
    if (std::isfinite(poly.u(i))) { rp_p = std::max(rp_p, gx_p(i) - poly.u(i)); }
  }
  const double rd_p = (p_orig * x_p + q_orig + poly.G.transpose() * y_p).lpNorm<Eigen::Infinity>();

  if (std::max(rp_p, rd_p) < std::max(rp, rd)) {
    x = std::move(x_p);
    y = std::move(y_p);
    rp = rp_p;
    rd = rd_p;
    return true;
  }
  return false;
}

}  // namespace detail

FeasibilityCertificate feasibility_check(const ConstraintSet& set, double tol_feas, const QpSettings& settings);
QpSettings phase1_settings(const QpSettings& base);

inline QpSolution QpSolver::solve(const QpProblem& prob) const
{
  const Eigen::Index n = prob.H.rows();
  if (prob.H.cols() != n || prob.f.size() != n) {
    throw std::invalid_argument("solve_qp: inconsistent objective dimensions");
  }
  if (set_dimension(prob.set) != n) { throw std::invalid_argument("solve_qp: set dimension mismatch"); }
  if (!is_symmetric(prob.H, default_psd_tol(prob.H))) {
    throw std::invalid_argument("solve_qp: H must be symmetric");
  }
  if (!cholesky_pd_quick(prob.H)) { throw std::invalid_argument("solve_qp: H must be positive definite"); }

  const Polyhedron poly = as_polyhedron(prob.set);
  const Eigen::Index m = poly.G.rows();

  // standard form: (1/2) x'Px + q'x with P = 2H, q = 2f, plus a scalar cost
  // scaling and row equilibration of G for conditioning
  const Matrix p_orig = 2.0 * prob.H;
  const Vector q_orig = 2.0 * prob.f;
  const double kappa = 1.0 / std::max(1.0, p_orig.lpNorm<Eigen::Infinity>());
  const Matrix P = kappa * p_orig;
  const Vector q = kappa * q_orig;

  Vector d(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double rn = poly.G.row(i).lpNorm<Eigen::Infinity>();
    d(i) = (rn > 1e-12) ? 1.0 / rn : 1.0;
  }
  const Matrix gs = d.asDiagonal() * poly.G;
  Vector ls(m);
  Vector us(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    ls(i) = std::isfinite(poly.l(i)) ? d(i) * poly.l(i) : -kInf;
    us(i) = std::isfinite(poly.u(i)) ? d(i) * poly.u(i) : kInf;
  }

  std::vector<bool> eq_row(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) { eq_row[static_cast<std::size_t>(i)] = (poly.l(i) == poly.u(i)); }

  double rho = settings_.rho;
  Vector rho_vec(m);
  auto fill_rho = [&]() {
    for (Eigen::Index i = 0; i < m; ++i) {
      rho_vec(i) = eq_row[static_cast<std::size_t>(i)] ? rho * settings_.equality_rho_scale : rho;
    }
  };
  fill_rho();

  Eigen::LLT<Matrix> kkt;
  auto factorize = [&]() {
    Matrix k = P;
    k.diagonal().array() += settings_.sigma;
    k.noalias() += gs.transpose() * rho_vec.asDiagonal() * gs;
    kkt.compute(k);
    if (kkt.info() != Eigen::Success) { throw QpFailure(QpStatus::max_iterations, "solve_qp: KKT factorization failed"); }
  };
  factorize();

  auto clamp_row = [&](double v, Eigen::Index i) { return std::min(std::max(v, ls(i)), us(i)); };

  Vector x = Vector::Zero(n);
  Vector z(m);
  for (Eigen::Index i = 0; i < m; ++i) { z(i) = clamp_row(0.0, i); }
  Vector y = Vector::Zero(m);
  Vector dy = Vector::Zero(m);

  QpSolution out;
  out.status = QpStatus::max_iterations;

  const double tol = settings_.tol;
  double rp = kInf;
  double rd = kInf;
  bool converged = false;
  int iter = 0;

  Vector rhs(n), xt(n), zt(m), z_relax(m), z_next(m);

  Vector merit_x, merit_v;
  if (settings_.record_merit) {
    merit_x = x;
    merit_v = z + y.cwiseQuotient(rho_vec);
    out.merit_trace.reserve(static_cast<std::size_t>(std::min(settings_.max_iter, 4096)));
  }

  for (iter = 1; iter <= settings_.max_iter; ++iter) {
    rhs = settings_.sigma * x - q;
    rhs.noalias() += gs.transpose() * (rho_vec.cwiseProduct(z) - y);
    xt = kkt.solve(rhs);
    zt.noalias() = gs * xt;

    x = settings_.alpha * xt + (1.0 - settings_.alpha) * x;
    z_relax = settings_.alpha * zt + (1.0 - settings_.alpha) * z;
    for (Eigen::Index i = 0; i < m; ++i) {
      z_next(i) = clamp_row(z_relax(i) + y(i) / rho_vec(i), i);
    }
    dy = rho_vec.cwiseProduct(z_relax - z_next);
    y += dy;
    z = z_next;

    if (settings_.record_merit) {
      const Vector v = z + y.cwiseQuotient(rho_vec);
      const double step2 = settings_.sigma * (x - merit_x).squaredNorm()
                           + (v - merit_v).cwiseAbs2().dot(rho_vec);
      out.merit_trace.push_back(std::sqrt(step2));
      merit_x = x;
      merit_v = v;
    }

    if (iter % settings_.check_interval != 0 && iter != settings_.max_iter) { continue; }

    // residuals in the units of the original problem
    const Vector gxs = gs * x;
    double rp_orig = 0.0;
    double sp = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      rp_orig = std::max(rp_orig, std::abs(gxs(i) - z(i)) / d(i));
      sp = std::max({sp, std::abs(gxs(i)) / d(i), std::abs(z(i)) / d(i)});
    }
    const Vector px = P * x;
    const Vector gty = gs.transpose() * y;
    const double rd_orig = (px + q + gty).lpNorm<Eigen::Infinity>() / kappa;
    const double sd = std::max({px.lpNorm<Eigen::Infinity>(), gty.lpNorm<Eigen::Infinity>(),
                                q.lpNorm<Eigen::Infinity>()}) / kappa;

    rp = rp_orig;
    rd = rd_orig;
    if (rp_orig <= tol * (1.0 + sp) && rd_orig <= tol * (1.0 + sd)) {
      converged = true;
      break;
    }

    // primal infeasibility certificate on the dual step direction
    const double dy_norm = dy.lpNorm<Eigen::Infinity>();
    if (settings_.classify_failures && dy_norm > 1e-10) {
      const double cert_tol = 1e-10 * dy_norm;
      bool support_finite = true;
      double support = 0.0;
      for (Eigen::Index i = 0; i < m && support_finite; ++i) {
        if (dy(i) > 0.0) {
          if (!std::isfinite(us(i))) { support_finite = false; } else { support += us(i) * dy(i); }
        } else if (dy(i) < 0.0) {
          if (!std::isfinite(ls(i))) { support_finite = false; } else { support += ls(i) * dy(i); }
        }
      }
      if (support_finite && (gs.transpose() * dy).lpNorm<Eigen::Infinity>() <= cert_tol
          && support <= -cert_tol) {
        const FeasibilityCertificate cert = feasibility_check(prob.set, settings_.tol_feas, phase1_settings(settings_));
        if (!cert.feasible) {
          out.x = x;
          out.dual = Vector::Zero(m);
          out.iterations = iter;
          out.primal_residual = rp;
          out.dual_residual = rd;
          out.status = QpStatus::infeasible;
          return out;
        }
      }
    }

    if (settings_.adaptive_rho && iter % (5 * settings_.check_interval) == 0) {
      const double num = rp_orig / std::max(sp, 1e-12);
      const double den = rd_orig / std::max(sd, 1e-12);
      const double ratio = std::sqrt(num / std::max(den, 1e-16));
      const double rho_new = std::clamp(rho * ratio, 1e-6, 1e6);
      if (rho_new > 5.0 * rho || rho_new < rho / 5.0) {
        rho = rho_new;
        fill_rho();
        factorize();
      }
    }
  }

  // duals back in original units
  Vector y_orig = (d.cwiseProduct(y)) / kappa;

  if (!converged) {
    out.x = x;
    out.dual = y_orig;
    out.iterations = std::min(iter, settings_.max_iter);
    out.primal_residual = rp;
    out.dual_residual = rd;
    out.status = QpStatus::max_iterations;
    if (settings_.classify_failures) {
      const FeasibilityCertificate cert = feasibility_check(prob.set, settings_.tol_feas, phase1_settings(settings_));
      if (!cert.feasible) { out.status = QpStatus::infeasible; }
    }
    out.objective = x.dot(prob.H * x) + 2.0 * prob.f.dot(x);
    return out;
  }

  double rp_final = rp;
  double rd_final = rd;
  bool polished = false;
  if (settings_.polish) {
    polished = detail::polish_solution(p_orig, q_orig, poly, x, y_orig, rp_final, rd_final);
  }

  out.x = x;
  out.dual = y_orig;
  out.iterations = iter;
  out.primal_residual = rp_final;
  out.dual_residual = rd_final;
  out.polished = polished;
  out.status = QpStatus::solved;
  out.objective = x.dot(prob.H * x) + 2.0 * prob.f.dot(x);
  return out;
}

inline QpSettings phase1_settings(const QpSettings& base)
{
  QpSettings s = base;
  s.classify_failures = false;
  s.tol = std::min(base.tol, base.tol_feas * 1e-2);
  return s;
}

inline QpSolution solve_qp(const QpProblem& prob, double qp_tol = 1e-8, int max_iter = 20000)
{
  QpSettings s;
  s.tol = qp_tol;
  s.max_iter = max_iter;
  return QpSolver(s).solve(prob);
}

/// argmin_{x in set} || x - v ||_P for symmetric positive definite P.
/// Throws QpFailure when the underlying solve does not reach `solved`.
inline Vector weighted_projection(const Matrix& p, const Vector& v, const ConstraintSet& set,
                                  const QpSolver& solver)
{
  QpSolution sol = solver.solve(QpProblem{p, -(p * v), set});
  if (sol.status != QpStatus::solved) {
    throw QpFailure(sol.status, std::string("weighted_projection: ") + to_string(sol.status));
  }
  return std::move(sol.x);
}

inline Vector weighted_projection(const Matrix& p, const Vector& v, const ConstraintSet& set,
                                  const QpSettings& settings = {})
{
  return weighted_projection(p, v, set, QpSolver(settings));
}

/// Nonemptiness check. Boxes and budget boxes are decided in closed form;
/// generic polyhedra run a phase-1 least-violation QP with one slack per row.
inline FeasibilityCertificate feasibility_check(const ConstraintSet& set, double tol_feas = kTolFeas,
                                                const QpSettings& settings = QpSettings{})
{
  FeasibilityCertificate cert;

  if (const auto* box = std::get_if<Box>(&set)) {
    Vector mid = 0.5 * (box->lower + box->upper);
    cert.max_violation = violation(set, mid);
    cert.feasible = cert.max_violation <= tol_feas;
    if (cert.feasible) { cert.witness = std::move(mid); }
    return cert;
  }

  if (const auto* bb = std::get_if<BudgetBox>(&set)) {
    const Eigen::Index n = bb->lower.size();
    // start at the corner minimizing b'x, then raise coordinates until the
    // budget is met (exact water-fill, no solver noise)
    Vector x(n);
    double reach_min = 0.0;
    double reach_max = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double b = bb->budget_vector(i);
      x(i) = (b >= 0.0) ? bb->lower(i) : bb->upper(i);
      reach_min += (b >= 0.0) ? b * bb->lower(i) : b * bb->upper(i);
      reach_max += (b >= 0.0) ? b * bb->upper(i) : b * bb->lower(i);
    }
    double t = bb->budget_value - reach_min;
    if (t >= 0.0 && bb->budget_value <= reach_max) {
      for (Eigen::Index i = 0; i < n && t > 0.0; ++i) {
        const double b = bb->budget_vector(i);
        const double cap = std::abs(b) * (bb->upper(i) - bb->lower(i));
        if (cap <= 0.0) { continue; }
        const double take = std::min(cap, t);
        const double frac = take / cap;
        x(i) = (b >= 0.0) ? x(i) + frac * (bb->upper(i) - bb->lower(i))
                          : x(i) - frac * (bb->upper(i) - bb->lower(i));
        t -= take;
      }
    }
    cert.max_violation = violation(set, x);
    cert.feasible = cert.max_violation <= tol_feas;
    if (cert.feasible) { cert.witness = std::move(x); }
    return cert;
  }

  const auto& poly = std::get<Polyhedron>(set);
  const Eigen::Index n = poly.G.cols();
  const Eigen::Index m = poly.G.rows();

  // reference point from the syntactic bound certificate when available
  Vector x_ref = Vector::Zero(n);
  if (auto bounds = detail::implied_coordinate_bounds(poly)) {
    x_ref = 0.5 * (bounds->first + bounds->second);
  }

  // phase-1: minimize sum s_i^2 (+ tiny pull of x toward x_ref) subject to
  //   l_i <= (Gx)_i + s_i,  (Gx)_i - s_i <= u_i,  s_i >= 0
  const double eps_x = 1e-12;
  Matrix h = Matrix::Zero(n + m, n + m);
  h.topLeftCorner(n, n).diagonal().setConstant(eps_x);
  h.bottomRightCorner(m, m).setIdentity();
  Vector f = Vector::Zero(n + m);
  f.head(n) = -eps_x * x_ref;

  Matrix g = Matrix::Zero(3 * m, n + m);
  Vector l = Vector::Constant(3 * m, -kInf);
  Vector u = Vector::Constant(3 * m, kInf);
  g.block(0, 0, m, n) = poly.G;
  g.block(0, n, m, m) = Matrix::Identity(m, m);
  l.head(m) = poly.l;
  g.block(m, 0, m, n) = poly.G;
  g.block(m, n, m, m) = -Matrix::Identity(m, m);
  u.segment(m, m) = poly.u;
  g.block(2 * m, n, m, m) = Matrix::Identity(m, m);
  l.tail(m).setZero();

  QpSettings s = phase1_settings(settings);
  // aggregate-constructed on purpose: the slack directions are unbounded but
  // the objective is coercive, and the certificate only applies to user sets
  QpSolution sol = QpSolver(s).solve(QpProblem{h, f, Polyhedron{std::move(g), std::move(l), std::move(u)}});

  Vector x = sol.x.head(n);
  cert.max_violation = violation(set, x);
  cert.feasible = cert.max_violation <= tol_feas;
  if (cert.feasible) { cert.witness = std::move(x); }
  return cert;
}

}  // namespace mfg
