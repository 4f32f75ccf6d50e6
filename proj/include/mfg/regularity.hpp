#pragma once

/// @file
/// Structural classification of the aggregation mapping from the cost data
/// alone, via the minimum eigenvalue of the symmetric block matrix
///
///   [ Q+Delta        Delta-C ]
///   [ (Delta-C)'     Q+Delta ]
///
/// plus the order conditions for firm nonexpansiveness and strict
/// pseudocontractivity, and the affine-map classification table used for
/// diagnostics. Each verdict carries the margin that produced it.

#include "mfg/game.hpp"
#include "mfg/linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mfg {

enum class IterationKind { picard, krasnoselskij, mann, ishikawa };

inline const char* to_string(IterationKind k)
{
  switch (k) {
    case IterationKind::picard: return "picard";
    case IterationKind::krasnoselskij: return "krasnoselskij";
    case IterationKind::mann: return "mann";
    case IterationKind::ishikawa: return "ishikawa";
  }
  return "unknown";
}

/// Metric families in which the respective properties are certified.
enum class MetricKind { identity, q_plus_delta, delta_minus_c, c_minus_delta };

inline const char* to_string(MetricKind m)
{
  switch (m) {
    case MetricKind::identity: return "identity";
    case MetricKind::q_plus_delta: return "q_plus_delta";
    case MetricKind::delta_minus_c: return "delta_minus_c";
    case MetricKind::c_minus_delta: return "c_minus_delta";
  }
  return "unknown";
}

/// Builds the requested metric matrix from the cost data (C symmetrized for
/// the order metrics). Throws when the matrix is not positive definite.
inline Matrix metric_matrix(const CostParams& p, MetricKind kind)
{
  Matrix m;
  switch (kind) {
    case MetricKind::identity: m = Matrix::Identity(p.n, p.n); break;
    case MetricKind::q_plus_delta: m = p.q_plus_delta(); break;
    case MetricKind::delta_minus_c: m = p.Delta - p.c_symmetric(); break;
    case MetricKind::c_minus_delta: m = p.c_symmetric() - p.Delta; break;
  }
  if (!cholesky_pd_quick(m)) {
    throw std::invalid_argument(std::string("metric_matrix: ") + to_string(kind)
                                + " is not positive definite for these cost parameters");
  }
  return m;
}

struct RegularityMargins
{
  double block_lambda_min = 0.0;    // min eigenvalue of the 2n x 2n block matrix
  double lipschitz = kInf;          // Lipschitz bound of the unconstrained map in the Q+Delta norm
  double contraction = -kInf;       // 1 - lipschitz; positive exactly when contractive
  double fne_order_lambda_min = 0.0;      // min eig of Delta - sym(C)
  double fne_shift_lambda_min = 0.0;      // min eig of sym(C) + Q
  double spc_order_lambda_min = 0.0;      // min eig of sym(C) - Delta
};

struct RegularityReport
{
  bool is_con = false;
  bool is_ne = false;
  bool is_fne = false;
  bool is_spc = false;
  bool asymmetric_c = false;  // when set, the FNE/SPC order tests were skipped
  RegularityMargins margins;
};

/// Classifies the aggregation mapping from the cost data. Strict matrix
/// inequalities are tested as lambda_min > tol * (1 + ||.||_inf); pass a
/// negative tol_psd for the default 1e-9 scale.
inline RegularityReport classify(const CostParams& params, double tol_psd = -1.0)
{
  validate_cost_params(params, tol_psd);
  const double tol = (tol_psd < 0.0) ? 1e-9 : tol_psd;
  const Eigen::Index n = params.n;

  const Matrix p = params.q_plus_delta();
  const Matrix b = params.delta_minus_c();

  Matrix block(2 * n, 2 * n);
  block.topLeftCorner(n, n) = p;
  block.topRightCorner(n, n) = b;
  block.bottomLeftCorner(n, n) = b.transpose();
  block.bottomRightCorner(n, n) = p;

  RegularityReport rep;
  rep.margins.block_lambda_min = jacobi_eigendecomposition(block).eigenvalues(0);
  const double thr_block = tol * (1.0 + block.lpNorm<Eigen::Infinity>());
  rep.is_con = rep.margins.block_lambda_min > thr_block;
  rep.is_ne = rep.margins.block_lambda_min >= -thr_block;

  rep.asymmetric_c =
      (params.C - params.C.transpose()).lpNorm<Eigen::Infinity>()
      > tol * (1.0 + params.C.lpNorm<Eigen::Infinity>());

  // Lipschitz bound of xhat in the Q+Delta norm: largest singular value of
  // P^{-1/2} (Delta - C) P^{-1/2}
  {
    const SymmetricEigen pe = jacobi_eigendecomposition(p);
    Matrix p_inv_half = pe.eigenvectors;
    for (Eigen::Index i = 0; i < n; ++i) {
      p_inv_half.col(i) /= std::sqrt(std::max(pe.eigenvalues(i), 1e-300));
    }
    const Matrix t = p_inv_half.transpose() * b * p_inv_half;  // eigvec-basis similarity
    const Matrix tt = t.transpose() * t;
    const double lam_max = jacobi_eigendecomposition(tt).eigenvalues(n - 1);
    rep.margins.lipschitz = std::sqrt(std::max(0.0, lam_max));
    rep.margins.contraction = 1.0 - rep.margins.lipschitz;
  }

  if (!rep.asymmetric_c) {
    const Matrix c_sym = params.c_symmetric();
    const Matrix fne_order = params.Delta - c_sym;
    const Matrix fne_shift = c_sym + params.Q;
    const Matrix spc_order = c_sym - params.Delta;
    rep.margins.fne_order_lambda_min = jacobi_eigendecomposition(fne_order).eigenvalues(0);
    rep.margins.fne_shift_lambda_min = jacobi_eigendecomposition(fne_shift).eigenvalues(0);
    rep.margins.spc_order_lambda_min = jacobi_eigendecomposition(spc_order).eigenvalues(0);
    rep.is_fne = rep.margins.fne_order_lambda_min > tol * (1.0 + fne_order.lpNorm<Eigen::Infinity>())
              && rep.margins.fne_shift_lambda_min >= -tol * (1.0 + fne_shift.lpNorm<Eigen::Infinity>());
    rep.is_spc = rep.margins.spc_order_lambda_min > tol * (1.0 + spc_order.lpNorm<Eigen::Infinity>());
  }

  // structural closure of the implication chain
  rep.is_ne = rep.is_ne || rep.is_fne;
  rep.is_spc = rep.is_spc || rep.is_ne;
  return rep;
}

/// Iterations with a convergence guarantee under the strongest certified
/// property, strongest-first. Empty when nothing is certified.
inline std::vector<IterationKind> admissible_iterations(const RegularityReport& rep)
{
  if (rep.is_con || rep.is_fne) {
    return {IterationKind::picard, IterationKind::krasnoselskij, IterationKind::mann,
            IterationKind::ishikawa};
  }
  if (rep.is_ne) {
    return {IterationKind::krasnoselskij, IterationKind::mann, IterationKind::ishikawa};
  }
  if (rep.is_spc) { return {IterationKind::mann, IterationKind::ishikawa}; }
  return {};
}

/// Default residual metric for a classified population: the Q+Delta norm
/// whenever nonexpansiveness holds, otherwise the norm in which the weaker
/// property is certified.
inline MetricKind default_metric(const RegularityReport& rep)
{
  if (rep.is_ne || rep.is_con) { return MetricKind::q_plus_delta; }
  if (rep.is_fne) { return MetricKind::delta_minus_c; }
  if (rep.is_spc) { return MetricKind::c_minus_delta; }
  return MetricKind::q_plus_delta;
}

/// Classification of the affine map z -> A z + b in the P-weighted norm.
/// The offset b plays no role; it is accepted to match the map's signature.
struct AffineRegularityReport
{
  bool con = false;
  bool ne = false;
  bool fne = false;
  bool smon = false;
  bool mon = false;
  bool pc = false;
  double con_lambda_max = 0.0;   // lambda_max(A'PA - P)
  double fne_lambda_max = 0.0;   // lambda_max(2A'PA - A'P - PA)
  double mon_lambda_min = 0.0;   // lambda_min(A'P + PA)
  double pc_lambda_max = 0.0;    // lambda_max(A'P + PA - 2P)
};

inline AffineRegularityReport affine_regularity(const Matrix& a, const Vector& b, const Matrix& p,
                                                double tol_psd = -1.0)
{
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n || p.rows() != n || p.cols() != n) {
    throw std::invalid_argument("affine_regularity: dimension mismatch");
  }
  const Metric metric(p);  // validates symmetric positive definite
  (void)metric;
  const double tol = (tol_psd < 0.0) ? 1e-9 : tol_psd;

  const Matrix apa = a.transpose() * p * a;
  const Matrix ap_pa = a.transpose() * p + p * a;

  const Matrix s_con = apa - p;
  const Matrix s_fne = 2.0 * apa - ap_pa;
  const Matrix s_pc = ap_pa - 2.0 * p;

  AffineRegularityReport rep;
  rep.con_lambda_max = jacobi_eigendecomposition(s_con).eigenvalues(n - 1);
  rep.fne_lambda_max = jacobi_eigendecomposition(s_fne).eigenvalues(n - 1);
  rep.mon_lambda_min = jacobi_eigendecomposition(ap_pa).eigenvalues(0);
  rep.pc_lambda_max = jacobi_eigendecomposition(s_pc).eigenvalues(n - 1);

  const double thr_con = tol * (1.0 + s_con.lpNorm<Eigen::Infinity>());
  const double thr_fne = tol * (1.0 + s_fne.lpNorm<Eigen::Infinity>());
  const double thr_mon = tol * (1.0 + ap_pa.lpNorm<Eigen::Infinity>());
  const double thr_pc = tol * (1.0 + s_pc.lpNorm<Eigen::Infinity>());

  rep.con = rep.con_lambda_max < -thr_con;
  rep.ne = rep.con_lambda_max <= thr_con;
  rep.fne = rep.fne_lambda_max <= thr_fne;
  rep.smon = rep.mon_lambda_min > thr_mon;
  rep.mon = rep.mon_lambda_min >= -thr_mon;
  rep.pc = rep.pc_lambda_max <= thr_pc;
  return rep;
}

}  // namespace mfg
