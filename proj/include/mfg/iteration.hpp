#pragma once

/// @file
/// Fixed-point iterations on the aggregation mapping:
///
///   picard         z+ = A(z)
///   krasnoselskij  z+ = z + lambda (A(z) - z),              lambda in (0,1)
///   mann           z+ = z + alpha_k (A(z) - z),             alpha_k -> 0, sum = inf
///   ishikawa       z+ = z + alpha_k (A(z + beta_k (A(z)-z)) - z)
///
/// with residual-based stopping, stagnation detection and a convergence
/// trace that serializes to CSV losslessly.

#include "mfg/aggregation.hpp"
#include "mfg/regularity.hpp"
#include "mfg/serialize.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg {

/// Step-size family alpha_k = scale / (k + offset)^exponent. With exponent
/// in (0, 1] and scale/offset^exponent < 1 the Mann conditions hold: steps
/// lie in (0,1), vanish, and their sum diverges. exponent == 0 degenerates
/// to a constant step (useful to compare against Krasnoselskij; it does not
/// satisfy the vanishing-step condition and is rejected by strict checks).
struct PowerSchedule
{
  double scale = 0.5;
  double exponent = 0.75;
  double offset = 1.0;

  double at(int k) const { return scale / std::pow(static_cast<double>(k) + offset, exponent); }
};

inline PowerSchedule mann_default_schedule() { return PowerSchedule{0.5, 0.75, 1.0}; }
inline PowerSchedule ishikawa_default_schedule() { return PowerSchedule{1.0, 0.5, 2.0}; }

inline void validate_schedule(const PowerSchedule& s, bool strict, const char* what)
{
  const std::string name(what);
  if (!(s.scale > 0.0) || !(s.offset > 0.0)) {
    throw std::invalid_argument(name + ": scale and offset must be positive");
  }
  if (!(s.exponent >= 0.0) || !(s.exponent <= 1.0)) {
    throw std::invalid_argument(name + ": exponent must lie in [0, 1]");
  }
  if (!(s.at(0) < 1.0)) { throw std::invalid_argument(name + ": first step must be below 1"); }
  if (strict && !(s.exponent > 0.0)) {
    throw std::invalid_argument(name + ": exponent must be positive for a vanishing-step schedule");
  }
}

enum class RunStatus { converged, max_iterations, stagnated };

inline const char* to_string(RunStatus s)
{
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iterations: return "max_iterations";
    case RunStatus::stagnated: return "stagnated";
  }
  return "unknown";
}

struct IterationConfig
{
  IterationKind kind = IterationKind::picard;
  double lambda = 0.5;                              // krasnoselskij
  PowerSchedule alpha = mann_default_schedule();    // mann / ishikawa outer
  PowerSchedule beta = ishikawa_default_schedule(); // ishikawa inner
  Vector z0;                                        // empty: zero start
  int max_outer = 5000;
  double stop_tol_abs = 1e-6;
  double stop_tol_rel = 1e-8;
  MetricKind metric = MetricKind::q_plus_delta;
  bool warm_start = true;   // take one plain A(z0) step before the scheme
  bool record_z = true;
  int stagnation_window = 100;
  double stagnation_tol = 1e-12;
  int threads = 1;
  bool cross_check = false;
  QpSettings qp{};
};

inline void validate_iteration_config(const IterationConfig& cfg, bool strict_schedules = false)
{
  if (cfg.max_outer < 1) { throw std::invalid_argument("iteration: max_outer must be at least 1"); }
  if (!(cfg.stop_tol_abs > 0.0) || !(cfg.stop_tol_rel >= 0.0)) {
    throw std::invalid_argument("iteration: stopping tolerances must be positive");
  }
  if (cfg.stagnation_window < 2) { throw std::invalid_argument("iteration: stagnation window too small"); }
  if (cfg.threads < 1) { throw std::invalid_argument("iteration: thread count must be positive"); }
  switch (cfg.kind) {
    case IterationKind::picard: break;
    case IterationKind::krasnoselskij:
      if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) {
        throw std::invalid_argument("iteration: krasnoselskij lambda must lie in (0, 1)");
      }
      break;
    case IterationKind::mann:
      validate_schedule(cfg.alpha, strict_schedules, "mann schedule");
      break;
    case IterationKind::ishikawa: {
      validate_schedule(cfg.alpha, strict_schedules, "ishikawa alpha schedule");
      // beta may start at 1 and must dominate alpha pointwise
      if (!(cfg.beta.scale > 0.0) || !(cfg.beta.offset > 0.0) || !(cfg.beta.exponent > 0.0)
          || !(cfg.beta.exponent <= 1.0) || !(cfg.beta.at(0) <= 1.0)) {
        throw std::invalid_argument("ishikawa beta schedule: needs exponent in (0,1] and first step <= 1");
      }
      for (int k = 0; k < cfg.max_outer; ++k) {
        if (cfg.alpha.at(k) > cfg.beta.at(k) * (1.0 + 1e-12)) {
          throw std::invalid_argument("ishikawa: alpha_k must not exceed beta_k over the run");
        }
      }
      break;
    }
  }
}

/// One update of the chosen scheme; evaluates the oracle once (twice for
/// ishikawa).
inline Vector step(IterationKind kind, int k, const Vector& z, const IterationConfig& cfg,
                   const std::function<Vector(const Vector&)>& oracle)
{
  switch (kind) {
    case IterationKind::picard: return oracle(z);
    case IterationKind::krasnoselskij: return z + cfg.lambda * (oracle(z) - z);
    case IterationKind::mann: return z + cfg.alpha.at(k) * (oracle(z) - z);
    case IterationKind::ishikawa: {
      const Vector az = oracle(z);
      const Vector inner = z + cfg.beta.at(k) * (az - z);
      return z + cfg.alpha.at(k) * (oracle(inner) - z);
    }
  }
  throw std::invalid_argument("step: unknown iteration kind");
}

struct TraceRecord
{
  int k = 0;
  Vector z;  // iterate the residual was measured at (empty when not recorded)
  double residual = 0.0;
  double step_norm = 0.0;
  std::int64_t qp_iterations = 0;
};

struct ConvergenceTrace
{
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::max_iterations;
  Vector z_final;
  MetricKind metric = MetricKind::q_plus_delta;

  double final_residual() const { return records.empty() ? kInf : records.back().residual; }
  int iterations() const { return static_cast<int>(records.size()); }
};

/// Runs the configured scheme on a population until the step norm and the
/// fixed-point residual both fall under the tolerances, the residual history
/// stagnates, or the iteration budget is exhausted.
inline ConvergenceTrace run(const Population& pop, const IterationConfig& cfg)
{
  validate_iteration_config(cfg);
  const Eigen::Index n = pop.dimension();

  Vector z = (cfg.z0.size() == 0) ? Vector(Vector::Zero(n)) : cfg.z0;
  if (z.size() != n) { throw std::invalid_argument("iteration: z0 dimension mismatch"); }

  const Metric metric(metric_matrix(pop.params, cfg.metric));

  AggregationOptions opts;
  opts.threads = cfg.threads;
  opts.qp = cfg.qp;
  const AggregationEvaluator evaluator(pop, opts, cfg.cross_check);

  ConvergenceTrace trace;
  trace.metric = cfg.metric;
  trace.records.reserve(static_cast<std::size_t>(std::min(cfg.max_outer, 4096)));

  auto push_record = [&](int k, const Vector& zk, double residual, double step_norm,
                         std::int64_t qp_iters) {
    TraceRecord rec;
    rec.k = k;
    if (cfg.record_z) { rec.z = zk; }
    rec.residual = residual;
    rec.step_norm = step_norm;
    rec.qp_iterations = qp_iters;
    trace.records.push_back(std::move(rec));
  };

  int k = 0;
  if (cfg.warm_start) {
    AggregationEvaluation eval = evaluator.evaluate(z);
    const double residual = metric.norm(eval.value - z);
    push_record(0, z, residual, residual, eval.qp_iterations);
    if (!eval.value.allFinite()) { throw std::runtime_error("iteration: non-finite iterate"); }
    z = std::move(eval.value);
    k = 1;
  }

  double best_recent = kInf;
  trace.status = RunStatus::max_iterations;

  for (; k < cfg.max_outer; ++k) {
    AggregationEvaluation eval = evaluator.evaluate(z);
    const Vector& az = eval.value;
    const double residual = metric.norm(az - z);
    std::int64_t qp_iters = eval.qp_iterations;

    Vector z_next;
    switch (cfg.kind) {
      case IterationKind::picard: z_next = az; break;
      case IterationKind::krasnoselskij: z_next = z + cfg.lambda * (az - z); break;
      case IterationKind::mann: z_next = z + cfg.alpha.at(k) * (az - z); break;
      case IterationKind::ishikawa: {
        const Vector inner = z + cfg.beta.at(k) * (az - z);
        AggregationEvaluation inner_eval = evaluator.evaluate(inner);
        qp_iters += inner_eval.qp_iterations;
        z_next = z + cfg.alpha.at(k) * (inner_eval.value - z);
        break;
      }
    }
    if (!z_next.allFinite()) { throw std::runtime_error("iteration: non-finite iterate"); }

    const double step_norm = metric.norm(z_next - z);
    push_record(k, z, residual, step_norm, qp_iters);

    if (step_norm <= cfg.stop_tol_abs + cfg.stop_tol_rel * metric.norm(z)
        && residual <= cfg.stop_tol_abs) {
      trace.status = RunStatus::converged;
      z = std::move(z_next);
      break;
    }

    // stagnation: best residual of the trailing window no longer improves on
    // the best seen before it
    const std::size_t window = static_cast<std::size_t>(cfg.stagnation_window);
    if (trace.records.size() > window) {
      best_recent = kInf;
      double best_before = kInf;
      const std::size_t cut = trace.records.size() - window;
      for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const double r = trace.records[i].residual;
        if (i < cut) { best_before = std::min(best_before, r); }
        else { best_recent = std::min(best_recent, r); }
      }
      if (best_before - best_recent < cfg.stagnation_tol) {
        trace.status = RunStatus::stagnated;
        z = std::move(z_next);
        break;
      }
    }

    z = std::move(z_next);
  }

  trace.z_final = std::move(z);
  return trace;
}

/// CSV layout: `k,residual,step_norm[,z_0..z_{n-1}]`, floats with 17
/// significant digits; a write/read round trip is bit exact.
inline void write_trace_csv(const ConvergenceTrace& trace, std::ostream& os, bool include_z = false)
{
  Eigen::Index n = 0;
  if (include_z) {
    for (const TraceRecord& rec : trace.records) {
      if (rec.z.size() > 0) { n = rec.z.size(); break; }
    }
    if (n == 0) { throw std::invalid_argument("write_trace_csv: no iterates recorded"); }
  }
  os << "k,residual,step_norm";
  for (Eigen::Index j = 0; j < n; ++j) { os << ",z_" << j; }
  os << "\n";
  for (const TraceRecord& rec : trace.records) {
    os << rec.k << ',' << format_double(rec.residual) << ',' << format_double(rec.step_norm);
    if (include_z) {
      if (rec.z.size() != n) { throw std::invalid_argument("write_trace_csv: inconsistent iterate sizes"); }
      for (Eigen::Index j = 0; j < n; ++j) { os << ',' << format_double(rec.z(j)); }
    }
    os << "\n";
  }
}

inline std::vector<TraceRecord> read_trace_csv(std::istream& is)
{
  std::string line;
  if (!std::getline(is, line)) { throw std::runtime_error("read_trace_csv: empty stream"); }
  if (line.rfind("k,residual,step_norm", 0) != 0) {
    throw std::runtime_error("read_trace_csv: unexpected header: " + line);
  }
  Eigen::Index n_cols = 0;
  for (char ch : line) {
    if (ch == ',') { ++n_cols; }
  }
  const Eigen::Index nz = n_cols - 2;

  std::vector<TraceRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) { continue; }
    std::stringstream ss(line);
    std::string field;
    TraceRecord rec;
    if (!std::getline(ss, field, ',')) { throw std::runtime_error("read_trace_csv: short row"); }
    rec.k = std::stoi(field);
    if (!std::getline(ss, field, ',')) { throw std::runtime_error("read_trace_csv: short row"); }
    rec.residual = parse_double(field);
    if (!std::getline(ss, field, ',')) { throw std::runtime_error("read_trace_csv: short row"); }
    rec.step_norm = parse_double(field);
    if (nz > 0) {
      rec.z.resize(nz);
      for (Eigen::Index j = 0; j < nz; ++j) {
        if (!std::getline(ss, field, ',')) { throw std::runtime_error("read_trace_csv: short row"); }
        rec.z(j) = parse_double(field);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace mfg
