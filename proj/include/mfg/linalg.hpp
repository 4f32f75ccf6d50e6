#pragma once

/// @file
/// Dense symmetric-matrix utilities: weighted norms, a cyclic Jacobi
/// eigensolver and definiteness verdicts used by the regularity tests.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Default absolute tolerance scale for definiteness decisions.
inline double default_psd_tol(const Matrix& m)
{
  return 1e-9 * (1.0 + m.lpNorm<Eigen::Infinity>());
}

inline bool is_symmetric(const Matrix& m, double tol)
{
  if (m.rows() != m.cols()) { return false; }
  return (m - m.transpose()).lpNorm<Eigen::Infinity>() <= tol;
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
struct SymmetricEigen
{
  Vector eigenvalues;
  Matrix eigenvectors;  // columns, same order as eigenvalues
};

/// Cyclic Jacobi rotations on the symmetrized input. Deterministic sweep
/// order; converges to near machine precision for the small dense matrices
/// used here.
inline SymmetricEigen jacobi_eigendecomposition(const Matrix& m, int max_sweeps = 64)
{
  if (m.rows() != m.cols()) { throw std::invalid_argument("jacobi: matrix must be square"); }
  const Eigen::Index n = m.rows();

  Matrix a = 0.5 * (m + m.transpose());
  Matrix v = Matrix::Identity(n, n);

  const double scale = a.norm();
  const double stop = (scale > 0.0) ? 1e-15 * scale : 0.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) { off += a(p, q) * a(p, q); }
    }
    if (std::sqrt(2.0 * off) <= stop) { break; }

    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-18 * scale) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        // two-sided rotation in the (p,q) plane
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.5 * (a(p, q) + a(q, p));
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // sort ascending, stable permutation of eigenvector columns
  SymmetricEigen out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) { order[static_cast<std::size_t>(i)] = i; }
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    out.eigenvalues(i) = a(src, src);
    out.eigenvectors.col(i) = v.col(src);
  }
  return out;
}

enum class Definiteness { positive_definite, positive_semidefinite, indefinite };

inline const char* to_string(Definiteness d)
{
  switch (d) {
    case Definiteness::positive_definite: return "positive_definite";
    case Definiteness::positive_semidefinite: return "positive_semidefinite";
    case Definiteness::indefinite: return "indefinite";
  }
  return "unknown";
}

struct DefinitenessVerdict
{
  Definiteness kind;
  double min_eigenvalue;
};

/// Classifies a symmetric matrix. Pass tol_psd < 0 to use the default
/// 1e-9 * (1 + ||M||_inf) scale. Asymmetry beyond that scale is an error.
inline DefinitenessVerdict psd_check(const Matrix& m, double tol_psd = -1.0)
{
  if (m.rows() != m.cols()) { throw std::invalid_argument("psd_check: matrix must be square"); }
  const double tol = (tol_psd < 0.0) ? default_psd_tol(m) : tol_psd;
  if (!is_symmetric(m, std::max(tol, default_psd_tol(m)))) {
    throw std::invalid_argument("psd_check: matrix is not symmetric within tolerance");
  }
  const SymmetricEigen eig = jacobi_eigendecomposition(m);
  const double lam_min = eig.eigenvalues(0);
  DefinitenessVerdict verdict{Definiteness::indefinite, lam_min};
  if (lam_min > tol) {
    verdict.kind = Definiteness::positive_definite;
  } else if (std::abs(lam_min) <= tol) {
    verdict.kind = Definiteness::positive_semidefinite;
  }
  return verdict;
}

/// Cheap positive-definiteness probe (Cholesky attempt), used on hot paths
/// where the minimum eigenvalue itself is not needed.
inline bool cholesky_pd_quick(const Matrix& m)
{
  if (m.rows() != m.cols()) { return false; }
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success;
}

/// || x ||_P = sqrt(x' P x) for symmetric positive definite P.
inline double weighted_norm(const Vector& x, const Matrix& p)
{
  if (p.rows() != p.cols() || p.rows() != x.size()) {
    throw std::invalid_argument("weighted_norm: dimension mismatch");
  }
  if (!is_symmetric(p, default_psd_tol(p)) || !cholesky_pd_quick(p)) {
    throw std::invalid_argument("weighted_norm: metric must be symmetric positive definite");
  }
  const double q = x.dot(p * x);
  return std::sqrt(std::max(0.0, q));
}

/// A validated inner-product metric; validates P once so norms can be taken
/// inside iteration loops without re-checking.
class Metric
{
public:
  explicit Metric(Matrix p) : p_(std::move(p))
  {
    if (p_.rows() != p_.cols()) { throw std::invalid_argument("Metric: matrix must be square"); }
    if (!is_symmetric(p_, default_psd_tol(p_)) || !cholesky_pd_quick(p_)) {
      throw std::invalid_argument("Metric: matrix must be symmetric positive definite");
    }
  }

  static Metric identity(Eigen::Index n) { return Metric(Matrix::Identity(n, n)); }

  const Matrix& matrix() const { return p_; }
  double inner(const Vector& x, const Vector& y) const { return x.dot(p_ * y); }
  double squared(const Vector& x) const { return std::max(0.0, x.dot(p_ * x)); }
  double norm(const Vector& x) const { return std::sqrt(squared(x)); }

private:
  Matrix p_;
};

}  // namespace mfg
