#pragma once

/// @file
/// Bounded convex constraint sets: coordinate boxes, boxes with one budget
/// equality, and general polyhedra l <= G x <= u. Every set is certified
/// bounded at construction; unbounded inputs are rejected.

#include "mfg/linalg.hpp"

#include <limits>
#include <optional>
#include <stdexcept>
#include <variant>

namespace mfg {

inline constexpr double kTolFeas = 1e-7;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Axis-aligned box, lower <= x <= upper (entries must be finite).
struct Box
{
  Vector lower;
  Vector upper;
};

/// Box intersected with a single budget equality b' x = budget_value.
struct BudgetBox
{
  Vector lower;
  Vector upper;
  Vector budget_vector;
  double budget_value = 0.0;
};

/// Row-wise two-sided polyhedron l <= G x <= u; equality rows use l_i == u_i.
struct Polyhedron
{
  Matrix G;
  Vector l;
  Vector u;
};

using ConstraintSet = std::variant<Box, BudgetBox, Polyhedron>;

inline Eigen::Index set_dimension(const ConstraintSet& set)
{
  return std::visit([](const auto& s) -> Eigen::Index {
    using T = std::decay_t<decltype(s)>;
    if constexpr (std::is_same_v<T, Polyhedron>) { return s.G.cols(); }
    else { return s.lower.size(); }
  }, set);
}

namespace detail {

/// Per-coordinate interval bounds implied by the rows: direct singleton rows
/// seed the intervals, then finite bounds propagate through rows by interval
/// arithmetic until a fixed point. Returns per-coordinate [lo, hi] when every
/// coordinate ends up finite on both sides.
inline std::optional<std::pair<Vector, Vector>> implied_coordinate_bounds(const Polyhedron& p)
{
  const Eigen::Index n = p.G.cols();
  const Eigen::Index m = p.G.rows();
  Vector lo = Vector::Constant(n, -kInf);
  Vector hi = Vector::Constant(n, kInf);

  const int max_passes = static_cast<int>(std::max<Eigen::Index>(16, 2 * (n + 1)));
  for (int pass = 0; pass < max_passes; ++pass) {
    bool changed = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double g = p.G(i, j);
        if (g == 0.0) { continue; }
        // interval of sum_{k != j} G(i,k) x_k under current bounds
        double rest_lo = 0.0;
        double rest_hi = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == j) { continue; }
          const double gk = p.G(i, k);
          if (gk == 0.0) { continue; }
          const double a = (gk > 0.0) ? gk * lo(k) : gk * hi(k);
          const double b = (gk > 0.0) ? gk * hi(k) : gk * lo(k);
          rest_lo += a;
          rest_hi += b;
        }
        // g * x_j in [l_i - rest_hi, u_i - rest_lo]
        const double num_lo = p.l(i) - rest_hi;
        const double num_hi = p.u(i) - rest_lo;
        double cand_lo;
        double cand_hi;
        if (g > 0.0) {
          cand_lo = num_lo / g;
          cand_hi = num_hi / g;
        } else {
          cand_lo = num_hi / g;
          cand_hi = num_lo / g;
        }
        if (std::isfinite(cand_lo) && cand_lo > lo(j)) { lo(j) = cand_lo; changed = true; }
        if (std::isfinite(cand_hi) && cand_hi < hi(j)) { hi(j) = cand_hi; changed = true; }
      }
    }
    if (!changed) { break; }
  }

  for (Eigen::Index j = 0; j < n; ++j) {
    if (!std::isfinite(lo(j)) || !std::isfinite(hi(j))) { return std::nullopt; }
  }
  return std::make_pair(std::move(lo), std::move(hi));
}

}  // namespace detail

inline Box make_box(Vector lower, Vector upper)
{
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw std::invalid_argument("make_box: bound vectors must match and be nonempty");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i))) {
      throw std::invalid_argument("make_box: bounds must be finite");
    }
    if (lower(i) > upper(i)) { throw std::invalid_argument("make_box: lower exceeds upper"); }
  }
  return Box{std::move(lower), std::move(upper)};
}

inline BudgetBox make_budget_box(Vector lower, Vector upper, Vector budget_vector, double budget_value)
{
  Box box = make_box(std::move(lower), std::move(upper));
  if (budget_vector.size() != box.lower.size()) {
    throw std::invalid_argument("make_budget_box: budget vector dimension mismatch");
  }
  if (!budget_vector.allFinite() || !std::isfinite(budget_value)) {
    throw std::invalid_argument("make_budget_box: budget row must be finite");
  }
  if (budget_vector.lpNorm<Eigen::Infinity>() == 0.0) {
    throw std::invalid_argument("make_budget_box: budget vector must be nonzero");
  }
  return BudgetBox{std::move(box.lower), std::move(box.upper), std::move(budget_vector), budget_value};
}

/// Validates shape and certifies boundedness. A polyhedron whose implied
/// coordinate intervals do not all come out finite is rejected even if it
/// happens to be bounded; the certificate is syntactic by design.
inline Polyhedron make_polyhedron(Matrix G, Vector l, Vector u)
{
  if (G.rows() == 0 || G.cols() == 0) { throw std::invalid_argument("make_polyhedron: empty system"); }
  if (l.size() != G.rows() || u.size() != G.rows()) {
    throw std::invalid_argument("make_polyhedron: bound dimensions must match rows");
  }
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    if (std::isnan(l(i)) || std::isnan(u(i))) { throw std::invalid_argument("make_polyhedron: NaN bound"); }
    if (l(i) > u(i)) { throw std::invalid_argument("make_polyhedron: lower exceeds upper on a row"); }
  }
  if (!G.allFinite()) { throw std::invalid_argument("make_polyhedron: matrix must be finite"); }
  Polyhedron p{std::move(G), std::move(l), std::move(u)};
  if (!detail::implied_coordinate_bounds(p)) {
    throw std::invalid_argument("make_polyhedron: boundedness certificate failed");
  }
  return p;
}

/// Canonical polyhedral form. Box -> identity rows; BudgetBox -> box rows
/// followed by one equality row; Polyhedron -> itself.
inline Polyhedron as_polyhedron(const ConstraintSet& set)
{
  if (const auto* box = std::get_if<Box>(&set)) {
    const Eigen::Index n = box->lower.size();
    return Polyhedron{Matrix::Identity(n, n), box->lower, box->upper};
  }
  if (const auto* bb = std::get_if<BudgetBox>(&set)) {
    const Eigen::Index n = bb->lower.size();
    Matrix g(n + 1, n);
    g.topRows(n) = Matrix::Identity(n, n);
    g.row(n) = bb->budget_vector.transpose();
    Vector l(n + 1);
    Vector u(n + 1);
    l.head(n) = bb->lower;
    u.head(n) = bb->upper;
    l(n) = bb->budget_value;
    u(n) = bb->budget_value;
    return Polyhedron{std::move(g), std::move(l), std::move(u)};
  }
  return std::get<Polyhedron>(set);
}

/// Membership within an absolute row-wise tolerance.
inline bool contains(const ConstraintSet& set, const Vector& x, double tol_feas = kTolFeas)
{
  if (x.size() != set_dimension(set)) { throw std::invalid_argument("contains: dimension mismatch"); }
  if (const auto* box = std::get_if<Box>(&set)) {
    return ((x - box->lower).array() >= -tol_feas).all()
        && ((box->upper - x).array() >= -tol_feas).all();
  }
  if (const auto* bb = std::get_if<BudgetBox>(&set)) {
    const bool in_box = ((x - bb->lower).array() >= -tol_feas).all()
                     && ((bb->upper - x).array() >= -tol_feas).all();
    return in_box && std::abs(bb->budget_vector.dot(x) - bb->budget_value) <= tol_feas;
  }
  const auto& p = std::get<Polyhedron>(set);
  const Vector gx = p.G * x;
  return ((gx - p.l).array() >= -tol_feas).all() && ((p.u - gx).array() >= -tol_feas).all();
}

/// Largest row-wise constraint violation at x (0 when inside).
inline double violation(const ConstraintSet& set, const Vector& x)
{
  const Polyhedron p = as_polyhedron(set);
  const Vector gx = p.G * x;
  double v = 0.0;
  for (Eigen::Index i = 0; i < gx.size(); ++i) {
    v = std::max(v, p.l(i) - gx(i));
    v = std::max(v, gx(i) - p.u(i));
  }
  return v;
}

struct FeasibilityCertificate
{
  bool feasible = false;
  std::optional<Vector> witness;
  double max_violation = 0.0;
};

}  // namespace mfg
