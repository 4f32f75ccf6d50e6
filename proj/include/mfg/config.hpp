#pragma once

/// @file
/// Scenario configs (strict JSON, unknown keys rejected, every violation
/// reported) and the command orchestration behind the CLI: classify, run,
/// verify-nash, sweep. Artifacts carry floats with 17 significant digits and
/// nothing machine-dependent, so a rerun with the same config and seed is
/// byte-identical regardless of thread count.

#include "mfg/iteration.hpp"
#include "mfg/nash.hpp"
#include "mfg/response.hpp"
#include "mfg/scenarios.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfg {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitNumericalFailure = 4;

/// Carries every schema or invariant violation found in a config document.
class ConfigError : public std::runtime_error
{
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations))
  {
  }

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& items)
  {
    std::string out = "invalid config";
    for (const std::string& item : items) {
      out += "\n  - ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

enum class ScenarioKind { production_planning, pev, lq, custom };

inline const char* to_string(ScenarioKind k)
{
  switch (k) {
    case ScenarioKind::production_planning: return "production_planning";
    case ScenarioKind::pev: return "pev";
    case ScenarioKind::lq: return "lq";
    case ScenarioKind::custom: return "custom";
  }
  return "unknown";
}

/// PEV scenario as configured; gammas are drawn from [gamma_lo, gamma_hi)
/// with the run seed when not given explicitly.
struct PevScenario
{
  PevSpec spec;
  int agents = 50;
  double gamma_lo = 0.2;
  double gamma_hi = 0.8;
};

struct ScenarioConfig
{
  ScenarioKind kind = ScenarioKind::pev;

  PevScenario pev;
  ProductionPlanningSpec production;
  LqSpec lq;
  CostParams custom_params;
  std::vector<Agent> custom_agents;
  double custom_a_bar = 1.0;

  std::uint64_t seed = 0;
  bool iteration_auto = true;  // pick the first certified scheme
  bool metric_auto = true;     // pick the metric matching the certificate
  bool trace_z = false;        // emit iterate columns in the trace CSV
  IterationConfig iteration;
  std::vector<int> sweep_populations;
};

inline std::optional<IterationKind> iteration_kind_from_string(std::string_view s)
{
  if (s == "picard") { return IterationKind::picard; }
  if (s == "krasnoselskij") { return IterationKind::krasnoselskij; }
  if (s == "mann") { return IterationKind::mann; }
  if (s == "ishikawa") { return IterationKind::ishikawa; }
  return std::nullopt;
}

inline std::optional<MetricKind> metric_kind_from_string(std::string_view s)
{
  if (s == "identity") { return MetricKind::identity; }
  if (s == "q_plus_delta") { return MetricKind::q_plus_delta; }
  if (s == "delta_minus_c") { return MetricKind::delta_minus_c; }
  if (s == "c_minus_delta") { return MetricKind::c_minus_delta; }
  return std::nullopt;
}

namespace detail {

using config_json = nlohmann::json;

struct Violations
{
  std::vector<std::string> items;

  void add(const std::string& path, const std::string& what)
  {
    items.push_back(path.empty() ? what : path + ": " + what);
  }
};

inline const config_json* get_child(const config_json& obj, const char* key)
{
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline void check_keys(const config_json& obj, const std::string& path,
                       std::initializer_list<std::string_view> allowed, Violations& v)
{
  for (const auto& item : obj.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(), [&](std::string_view a) { return item.key() == a; });
    if (!known) { v.add(path.empty() ? item.key() : path + "." + item.key(), "unknown key"); }
  }
}

inline double read_double(const config_json& obj, const char* key, const std::string& path,
                          double fallback, Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return fallback; }
  if (!c->is_number()) {
    v.add(path + "." + key, "expected a number");
    return fallback;
  }
  return c->get<double>();
}

inline int read_int(const config_json& obj, const char* key, const std::string& path, int fallback,
                    Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return fallback; }
  if (!c->is_number_integer() && !c->is_number_unsigned()) {
    v.add(path + "." + key, "expected an integer");
    return fallback;
  }
  return c->get<int>();
}

inline std::uint64_t read_u64(const config_json& obj, const char* key, const std::string& path,
                              std::uint64_t fallback, Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return fallback; }
  if (c->is_number_unsigned()) { return c->get<std::uint64_t>(); }
  if (c->is_number_integer() && c->get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(c->get<std::int64_t>());
  }
  v.add(path + "." + key, "expected a nonnegative integer");
  return fallback;
}

inline bool read_bool(const config_json& obj, const char* key, const std::string& path, bool fallback,
                      Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return fallback; }
  if (!c->is_boolean()) {
    v.add(path + "." + key, "expected a boolean");
    return fallback;
  }
  return c->get<bool>();
}

inline std::string read_string(const config_json& obj, const char* key, const std::string& path,
                               std::string fallback, Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return fallback; }
  if (!c->is_string()) {
    v.add(path + "." + key, "expected a string");
    return fallback;
  }
  return c->get<std::string>();
}

inline std::optional<Vector> vector_value(const config_json& node, const std::string& path, Violations& v)
{
  if (!node.is_array()) {
    v.add(path, "expected an array of numbers");
    return std::nullopt;
  }
  Vector out(static_cast<Eigen::Index>(node.size()));
  Eigen::Index i = 0;
  for (const config_json& e : node) {
    if (!e.is_number()) {
      v.add(path + "[" + std::to_string(i) + "]", "expected a number");
      return std::nullopt;
    }
    out(i++) = e.get<double>();
  }
  return out;
}

inline std::optional<Vector> read_vector(const config_json& obj, const char* key, const std::string& path,
                                         Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return std::nullopt; }
  return vector_value(*c, path + "." + key, v);
}

inline std::optional<Matrix> matrix_value(const config_json& node, const std::string& path, Violations& v)
{
  if (!node.is_array() || node.empty()) {
    v.add(path, "expected a nonempty array of rows");
    return std::nullopt;
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(node.size());
  Eigen::Index cols = -1;
  Matrix out;
  Eigen::Index r = 0;
  for (const config_json& row : node) {
    const std::optional<Vector> vals = vector_value(row, path + "[" + std::to_string(r) + "]", v);
    if (!vals) { return std::nullopt; }
    if (cols < 0) {
      cols = vals->size();
      if (cols == 0) {
        v.add(path, "rows must be nonempty");
        return std::nullopt;
      }
      out.resize(rows, cols);
    } else if (vals->size() != cols) {
      v.add(path, "rows must all have the same length");
      return std::nullopt;
    }
    out.row(r++) = vals->transpose();
  }
  return out;
}

inline std::optional<Matrix> read_matrix(const config_json& obj, const char* key, const std::string& path,
                                         Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return std::nullopt; }
  return matrix_value(*c, path + "." + key, v);
}

inline PowerSchedule read_schedule(const config_json& obj, const char* key, const std::string& path,
                                   PowerSchedule fallback, Violations& v)
{
  const config_json* c = get_child(obj, key);
  if (c == nullptr) { return fallback; }
  const std::string p = path + "." + key;
  if (!c->is_object()) {
    v.add(p, "expected an object {scale, exponent, offset}");
    return fallback;
  }
  check_keys(*c, p, {"scale", "exponent", "offset"}, v);
  PowerSchedule s = fallback;
  s.scale = read_double(*c, "scale", p, s.scale, v);
  s.exponent = read_double(*c, "exponent", p, s.exponent, v);
  s.offset = read_double(*c, "offset", p, s.offset, v);
  return s;
}

inline void parse_pev_scenario(const config_json& sc, ScenarioConfig& cfg, Violations& v)
{
  const std::string path = "scenario";
  check_keys(sc, path,
             {"kind", "horizon", "agents", "price_slope", "delta", "gamma_lo", "gamma_hi", "gammas",
              "demand", "upper_bound"},
             v);
  PevScenario& p = cfg.pev;
  p.spec.horizon = read_int(sc, "horizon", path, p.spec.horizon, v);
  p.agents = read_int(sc, "agents", path, p.agents, v);
  p.spec.price_slope = read_double(sc, "price_slope", path, p.spec.price_slope, v);
  p.spec.delta = read_double(sc, "delta", path, p.spec.delta, v);
  p.gamma_lo = read_double(sc, "gamma_lo", path, p.gamma_lo, v);
  p.gamma_hi = read_double(sc, "gamma_hi", path, p.gamma_hi, v);

  if (p.spec.horizon < 1) { v.add(path + ".horizon", "must be at least 1"); }
  if (p.agents < 1) { v.add(path + ".agents", "must be at least 1"); }
  if (!(p.spec.delta > 0.0)) { v.add(path + ".delta", "must be strictly positive"); }
  if (!(p.spec.price_slope > 0.0)) { v.add(path + ".price_slope", "must be strictly positive"); }
  if (!(p.gamma_lo >= 0.0) || !(p.gamma_hi >= p.gamma_lo)) {
    v.add(path + ".gamma_lo/gamma_hi", "need 0 <= gamma_lo <= gamma_hi");
  }

  if (const std::optional<Vector> g = read_vector(sc, "gammas", path, v)) {
    p.spec.gammas.assign(g->data(), g->data() + g->size());
    if (p.spec.gammas.empty()) { v.add(path + ".gammas", "must not be empty"); }
    for (double gi : p.spec.gammas) {
      if (!(gi >= 0.0)) {
        v.add(path + ".gammas", "entries must be nonnegative");
        break;
      }
    }
  }
  if (const std::optional<Vector> d = read_vector(sc, "demand", path, v)) {
    if (d->size() != p.spec.horizon) { v.add(path + ".demand", "length must equal horizon"); }
    p.spec.demand = *d;
  }
  if (const config_json* ub = get_child(sc, "upper_bound")) {
    if (ub->is_number()) {
      p.spec.upper_bounds = {Vector::Constant(p.spec.horizon, ub->get<double>())};
    } else if (const std::optional<Vector> cap = vector_value(*ub, path + ".upper_bound", v)) {
      if (cap->size() != p.spec.horizon) { v.add(path + ".upper_bound", "length must equal horizon"); }
      p.spec.upper_bounds = {*cap};
    }
  }
}

inline void parse_production_scenario(const config_json& sc, ScenarioConfig& cfg, Violations& v)
{
  const std::string path = "scenario";
  check_keys(sc, path, {"kind", "agents", "p0", "rho", "r", "horizon", "s0"}, v);
  ProductionPlanningSpec& p = cfg.production;
  p.count = read_int(sc, "agents", path, p.count, v);
  p.p0 = read_double(sc, "p0", path, p.p0, v);
  p.rho = read_double(sc, "rho", path, p.rho, v);
  p.r = read_double(sc, "r", path, p.r, v);
  p.horizon = read_int(sc, "horizon", path, p.horizon, v);
  p.s0 = read_double(sc, "s0", path, p.s0, v);

  if (p.count < 1) { v.add(path + ".agents", "must be at least 1"); }
  if (p.horizon < 1) { v.add(path + ".horizon", "must be at least 1"); }
  if (!(p.rho > 0.0)) { v.add(path + ".rho", "must be strictly positive"); }
  if (!(p.r > 0.0)) { v.add(path + ".r", "must be strictly positive"); }
  if (!std::isfinite(p.p0) || !std::isfinite(p.s0)) { v.add(path + ".p0/s0", "must be finite"); }
}

/// Reads an array of per-step items that may be given once and broadcast.
template <typename T, typename Reader>
std::vector<T> read_per_step(const config_json& obj, const char* key, const std::string& path, int steps,
                             bool required, Violations& v, Reader&& reader)
{
  const config_json* c = get_child(obj, key);
  const std::string p = path + "." + key;
  if (c == nullptr) {
    if (required) { v.add(p, "required"); }
    return {};
  }
  if (!c->is_array() || c->empty()) {
    v.add(p, "expected a nonempty array (one entry per step, or a single shared entry)");
    return {};
  }
  std::vector<T> out;
  Eigen::Index i = 0;
  for (const config_json& e : *c) {
    std::optional<T> item = reader(e, p + "[" + std::to_string(i) + "]");
    if (!item) { return {}; }
    out.push_back(std::move(*item));
    ++i;
  }
  if (out.size() == 1 && steps > 1) { out.assign(static_cast<std::size_t>(steps), out.front()); }
  if (static_cast<int>(out.size()) != steps) {
    v.add(p, "need one entry per step (" + std::to_string(steps) + ") or a single shared entry");
    return {};
  }
  return out;
}

inline void parse_lq_scenario(const config_json& sc, ScenarioConfig& cfg, Violations& v)
{
  const std::string path = "scenario";
  check_keys(sc, path,
             {"kind", "horizon", "state_dim", "input_dim", "Q", "R", "eta", "gamma", "a_bar", "agents"},
             v);
  LqSpec& lq = cfg.lq;
  lq.horizon = read_int(sc, "horizon", path, lq.horizon, v);
  lq.state_dim = read_int(sc, "state_dim", path, static_cast<int>(lq.state_dim), v);
  lq.input_dim = read_int(sc, "input_dim", path, static_cast<int>(lq.input_dim), v);
  lq.gamma = read_double(sc, "gamma", path, lq.gamma, v);
  lq.a_bar = read_double(sc, "a_bar", path, lq.a_bar, v);
  if (lq.horizon < 1 || lq.state_dim < 1 || lq.input_dim < 1) {
    v.add(path, "horizon, state_dim and input_dim must be at least 1");
    return;
  }

  const auto matrix_reader = [&v](const config_json& e, const std::string& p) {
    return matrix_value(e, p, v);
  };
  lq.Q = read_per_step<Matrix>(sc, "Q", path, lq.horizon, true, v, matrix_reader);
  lq.R = read_per_step<Matrix>(sc, "R", path, lq.horizon, true, v, matrix_reader);
  if (const std::optional<Vector> eta = read_vector(sc, "eta", path, v)) { lq.eta = *eta; }
  else if (get_child(sc, "eta") == nullptr) { v.add(path + ".eta", "required"); }

  const config_json* agents = get_child(sc, "agents");
  if (agents == nullptr || !agents->is_array() || agents->empty()) {
    v.add(path + ".agents", "expected a nonempty array of agent objects");
    return;
  }
  const auto box_reader = [&](const std::string& base, const config_json& node, const char* lo_key,
                              const char* up_key) {
    std::vector<Box> boxes;
    const auto vec_reader = [&v](const config_json& e, const std::string& p) { return vector_value(e, p, v); };
    std::vector<Vector> lows = read_per_step<Vector>(node, lo_key, base, lq.horizon, true, v, vec_reader);
    std::vector<Vector> ups = read_per_step<Vector>(node, up_key, base, lq.horizon, true, v, vec_reader);
    if (static_cast<int>(lows.size()) != lq.horizon || static_cast<int>(ups.size()) != lq.horizon) {
      return boxes;
    }
    for (int t = 0; t < lq.horizon; ++t) {
      boxes.push_back(Box{lows[static_cast<std::size_t>(t)], ups[static_cast<std::size_t>(t)]});
    }
    return boxes;
  };

  int idx = 0;
  for (const config_json& a : *agents) {
    const std::string base = path + ".agents[" + std::to_string(idx) + "]";
    if (!a.is_object()) {
      v.add(base, "expected an object");
      ++idx;
      continue;
    }
    check_keys(a, base,
               {"A", "B", "s0", "state_lower", "state_upper", "input_lower", "input_upper", "weight"}, v);
    LqAgentSpec spec;
    if (const std::optional<Matrix> m = read_matrix(a, "A", base, v)) { spec.A = *m; }
    else if (get_child(a, "A") == nullptr) { v.add(base + ".A", "required"); }
    if (const std::optional<Matrix> m = read_matrix(a, "B", base, v)) { spec.B = *m; }
    else if (get_child(a, "B") == nullptr) { v.add(base + ".B", "required"); }
    if (const std::optional<Vector> s0 = read_vector(a, "s0", base, v)) { spec.s0 = *s0; }
    else if (get_child(a, "s0") == nullptr) { v.add(base + ".s0", "required"); }
    spec.weight = read_double(a, "weight", base, 1.0, v);
    spec.state_boxes = box_reader(base, a, "state_lower", "state_upper");
    spec.input_boxes = box_reader(base, a, "input_lower", "input_upper");
    cfg.lq.agents.push_back(std::move(spec));
    ++idx;
  }
}

inline std::optional<ConstraintSet> parse_constraint_set(const config_json& node, const std::string& path,
                                                         Violations& v)
{
  if (!node.is_object()) {
    v.add(path, "expected an object with a \"type\" key");
    return std::nullopt;
  }
  const std::string type = read_string(node, "type", path, "", v);
  try {
    if (type == "box") {
      check_keys(node, path, {"type", "lower", "upper"}, v);
      const std::optional<Vector> lo = read_vector(node, "lower", path, v);
      const std::optional<Vector> up = read_vector(node, "upper", path, v);
      if (!lo || !up) {
        v.add(path, "box needs lower and upper arrays");
        return std::nullopt;
      }
      return ConstraintSet{make_box(*lo, *up)};
    }
    if (type == "budget_box") {
      check_keys(node, path, {"type", "lower", "upper", "budget_vector", "budget_value"}, v);
      const std::optional<Vector> lo = read_vector(node, "lower", path, v);
      const std::optional<Vector> up = read_vector(node, "upper", path, v);
      const std::optional<Vector> bv = read_vector(node, "budget_vector", path, v);
      const config_json* val = get_child(node, "budget_value");
      if (!lo || !up || !bv || val == nullptr || !val->is_number()) {
        v.add(path, "budget_box needs lower, upper, budget_vector arrays and a numeric budget_value");
        return std::nullopt;
      }
      return ConstraintSet{make_budget_box(*lo, *up, *bv, val->get<double>())};
    }
    if (type == "polyhedron") {
      check_keys(node, path, {"type", "G", "l", "u"}, v);
      const std::optional<Matrix> g = read_matrix(node, "G", path, v);
      const std::optional<Vector> lo = read_vector(node, "l", path, v);
      const std::optional<Vector> up = read_vector(node, "u", path, v);
      if (!g || !lo || !up) {
        v.add(path, "polyhedron needs G, l, u");
        return std::nullopt;
      }
      return ConstraintSet{make_polyhedron(*g, *lo, *up)};
    }
  } catch (const std::invalid_argument& e) {
    v.add(path, e.what());
    return std::nullopt;
  }
  v.add(path + ".type", "expected one of box, budget_box, polyhedron");
  return std::nullopt;
}

inline void parse_custom_scenario(const config_json& sc, ScenarioConfig& cfg, Violations& v)
{
  const std::string path = "scenario";
  check_keys(sc, path, {"kind", "Q", "Delta", "C", "c", "a_bar", "agents"}, v);
  const std::optional<Matrix> q = read_matrix(sc, "Q", path, v);
  const std::optional<Matrix> delta = read_matrix(sc, "Delta", path, v);
  const std::optional<Matrix> c_mat = read_matrix(sc, "C", path, v);
  const std::optional<Vector> c_vec = read_vector(sc, "c", path, v);
  cfg.custom_a_bar = read_double(sc, "a_bar", path, 1.0, v);
  if (!q || !delta || !c_mat || !c_vec) {
    v.add(path, "custom scenario needs Q, Delta, C matrices and a c vector");
    return;
  }
  const Eigen::Index n = c_vec->size();
  const auto square = [&](const Matrix& m, const char* name) {
    if (m.rows() != n || m.cols() != n) {
      v.add(path + "." + name, "must be " + std::to_string(n) + "x" + std::to_string(n)
                                   + " to match c");
    }
  };
  square(*q, "Q");
  square(*delta, "Delta");
  square(*c_mat, "C");
  cfg.custom_params = CostParams{n, *q, *delta, *c_mat, *c_vec};

  const config_json* agents = get_child(sc, "agents");
  if (agents == nullptr || !agents->is_array() || agents->empty()) {
    v.add(path + ".agents", "expected a nonempty array of agent objects");
    return;
  }
  int idx = 0;
  for (const config_json& a : *agents) {
    const std::string base = path + ".agents[" + std::to_string(idx) + "]";
    if (!a.is_object()) {
      v.add(base, "expected an object");
      ++idx;
      continue;
    }
    check_keys(a, base, {"weight", "set"}, v);
    Agent agent;
    agent.id = idx;
    agent.weight = read_double(a, "weight", base, 1.0, v);
    const config_json* set = get_child(a, "set");
    if (set == nullptr) { v.add(base + ".set", "required"); }
    else if (std::optional<ConstraintSet> cs = parse_constraint_set(*set, base + ".set", v)) {
      agent.constraint = std::move(*cs);
    }
    cfg.custom_agents.push_back(std::move(agent));
    ++idx;
  }
}

inline void parse_iteration_block(const config_json& it, ScenarioConfig& cfg, Violations& v)
{
  const std::string path = "iteration";
  check_keys(it, path,
             {"kind", "metric", "lambda", "alpha", "beta", "max_iterations", "stop_tol_abs",
              "stop_tol_rel", "stagnation_window", "stagnation_tol", "warm_start", "z0"},
             v);
  IterationConfig& c = cfg.iteration;

  const std::string kind = read_string(it, "kind", path, "auto", v);
  if (kind != "auto") {
    if (const std::optional<IterationKind> k = iteration_kind_from_string(kind)) {
      c.kind = *k;
      cfg.iteration_auto = false;
    } else {
      v.add(path + ".kind", "expected auto, picard, krasnoselskij, mann or ishikawa");
    }
  }
  const std::string metric = read_string(it, "metric", path, "auto", v);
  if (metric != "auto") {
    if (const std::optional<MetricKind> m = metric_kind_from_string(metric)) {
      c.metric = *m;
      cfg.metric_auto = false;
    } else {
      v.add(path + ".metric", "expected auto, identity, q_plus_delta, delta_minus_c or c_minus_delta");
    }
  }

  c.lambda = read_double(it, "lambda", path, c.lambda, v);
  c.alpha = read_schedule(it, "alpha", path, c.alpha, v);
  c.beta = read_schedule(it, "beta", path, c.beta, v);
  c.max_outer = read_int(it, "max_iterations", path, c.max_outer, v);
  c.stop_tol_abs = read_double(it, "stop_tol_abs", path, c.stop_tol_abs, v);
  c.stop_tol_rel = read_double(it, "stop_tol_rel", path, c.stop_tol_rel, v);
  c.stagnation_window = read_int(it, "stagnation_window", path, c.stagnation_window, v);
  c.stagnation_tol = read_double(it, "stagnation_tol", path, c.stagnation_tol, v);
  c.warm_start = read_bool(it, "warm_start", path, c.warm_start, v);
  if (const std::optional<Vector> z0 = read_vector(it, "z0", path, v)) { c.z0 = *z0; }
}

inline void parse_qp_block(const config_json& qp, ScenarioConfig& cfg, Violations& v)
{
  const std::string path = "qp";
  check_keys(qp, path, {"tol", "max_iterations", "polish", "adaptive_rho"}, v);
  QpSettings& s = cfg.iteration.qp;
  s.tol = read_double(qp, "tol", path, s.tol, v);
  s.max_iter = read_int(qp, "max_iterations", path, s.max_iter, v);
  s.polish = read_bool(qp, "polish", path, s.polish, v);
  s.adaptive_rho = read_bool(qp, "adaptive_rho", path, s.adaptive_rho, v);
  if (!(s.tol > 0.0)) { v.add(path + ".tol", "must be strictly positive"); }
  if (s.max_iter < 1) { v.add(path + ".max_iterations", "must be at least 1"); }
}

}  // namespace detail

/// Parses and validates a config document. Every schema violation is
/// collected; on any failure a ConfigError carrying the full list is thrown.
inline ScenarioConfig parse_config(const std::string& text)
{
  detail::Violations v;
  detail::config_json doc;
  try {
    doc = detail::config_json::parse(text);
  } catch (const detail::config_json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  if (!doc.is_object()) { throw ConfigError({"top level: expected an object"}); }

  ScenarioConfig cfg;
  detail::check_keys(doc, "",
                     {"scenario", "iteration", "qp", "seed", "threads", "cross_check", "trace_z", "sweep"},
                     v);

  const detail::config_json* sc = detail::get_child(doc, "scenario");
  if (sc == nullptr || !sc->is_object()) {
    v.add("scenario", "required object");
  } else {
    const std::string kind = detail::read_string(*sc, "kind", "scenario", "", v);
    if (kind == "pev") {
      cfg.kind = ScenarioKind::pev;
      detail::parse_pev_scenario(*sc, cfg, v);
    } else if (kind == "production_planning") {
      cfg.kind = ScenarioKind::production_planning;
      detail::parse_production_scenario(*sc, cfg, v);
    } else if (kind == "lq") {
      cfg.kind = ScenarioKind::lq;
      detail::parse_lq_scenario(*sc, cfg, v);
    } else if (kind == "custom") {
      cfg.kind = ScenarioKind::custom;
      detail::parse_custom_scenario(*sc, cfg, v);
    } else {
      v.add("scenario.kind", "expected one of pev, production_planning, lq, custom");
    }
  }

  if (const detail::config_json* it = detail::get_child(doc, "iteration")) {
    if (it->is_object()) { detail::parse_iteration_block(*it, cfg, v); }
    else { v.add("iteration", "expected an object"); }
  }
  if (const detail::config_json* qp = detail::get_child(doc, "qp")) {
    if (qp->is_object()) { detail::parse_qp_block(*qp, cfg, v); }
    else { v.add("qp", "expected an object"); }
  }
  cfg.seed = detail::read_u64(doc, "seed", "", cfg.seed, v);
  cfg.iteration.threads = detail::read_int(doc, "threads", "", cfg.iteration.threads, v);
  cfg.iteration.cross_check = detail::read_bool(doc, "cross_check", "", cfg.iteration.cross_check, v);
  cfg.trace_z = detail::read_bool(doc, "trace_z", "", cfg.trace_z, v);
  if (cfg.iteration.threads < 1) { v.add("threads", "must be at least 1"); }

  if (const detail::config_json* sweep = detail::get_child(doc, "sweep")) {
    if (!sweep->is_object()) { v.add("sweep", "expected an object"); }
    else {
      detail::check_keys(*sweep, "sweep", {"populations"}, v);
      const detail::config_json* pops = detail::get_child(*sweep, "populations");
      if (pops == nullptr || !pops->is_array() || pops->empty()) {
        v.add("sweep.populations", "expected a nonempty array of population sizes");
      } else {
        Eigen::Index i = 0;
        for (const detail::config_json& e : *pops) {
          if (!e.is_number_integer() && !e.is_number_unsigned()) {
            v.add("sweep.populations[" + std::to_string(i) + "]", "expected an integer");
          } else if (e.get<int>() < 1) {
            v.add("sweep.populations[" + std::to_string(i) + "]", "must be at least 1");
          } else {
            cfg.sweep_populations.push_back(e.get<int>());
          }
          ++i;
        }
      }
    }
  }

  // scheme-specific numeric checks once the kind is known; auto kinds are
  // validated again after resolution against the classification
  if (!cfg.iteration_auto) {
    try {
      validate_iteration_config(cfg.iteration, /*strict_schedules=*/true);
    } catch (const std::invalid_argument& e) {
      v.add("iteration", e.what());
    }
  }

  if (!v.items.empty()) { throw ConfigError(std::move(v.items)); }
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw ConfigError({"config file not readable: " + path.string()}); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Demand profile actually used by a PEV config (explicit or default).
inline Vector pev_demand(const ScenarioConfig& cfg)
{
  return cfg.pev.spec.demand.size() > 0 ? cfg.pev.spec.demand
                                        : default_demand_profile(cfg.pev.spec.horizon);
}

inline Population build_population(const ScenarioConfig& cfg)
{
  switch (cfg.kind) {
    case ScenarioKind::pev: {
      PevSpec spec = cfg.pev.spec;
      if (spec.gammas.empty()) {
        spec.gammas = pev_random_gammas(cfg.pev.agents, cfg.seed, cfg.pev.gamma_lo, cfg.pev.gamma_hi);
      }
      return build_pev_population(spec);
    }
    case ScenarioKind::production_planning: {
      ProductionPlanningSpec spec = cfg.production;
      spec.seed = cfg.seed;
      return build_production_planning(spec);
    }
    case ScenarioKind::lq: return build_lq_population(cfg.lq);
    case ScenarioKind::custom:
      return make_population(cfg.custom_params, cfg.custom_agents, cfg.custom_a_bar);
  }
  throw std::invalid_argument("build_population: unknown scenario kind");
}

namespace detail {

/// Serializes with 17-significant-digit floats (non-finite values become
/// null) and a fixed layout, so equal documents produce equal bytes.
inline void dump_json_impl(const nlohmann::ordered_json& j, std::string& out, int depth)
{
  using value_t = nlohmann::ordered_json::value_t;
  switch (j.type()) {
    case value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (const auto& item : j.items()) {
        out.append(2 * static_cast<std::size_t>(depth + 1), ' ');
        out += nlohmann::ordered_json(item.key()).dump();
        out += ": ";
        dump_json_impl(item.value(), out, depth + 1);
        if (++i < j.size()) { out += ','; }
        out += '\n';
      }
      out.append(2 * static_cast<std::size_t>(depth), ' ');
      out += '}';
      return;
    }
    case value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const nlohmann::ordered_json& e) {
        return !e.is_object() && !e.is_array();
      });
      if (flat) {
        out += '[';
        std::size_t i = 0;
        for (const auto& e : j) {
          dump_json_impl(e, out, depth);
          if (++i < j.size()) { out += ", "; }
        }
        out += ']';
        return;
      }
      out += "[\n";
      std::size_t i = 0;
      for (const auto& e : j) {
        out.append(2 * static_cast<std::size_t>(depth + 1), ' ');
        dump_json_impl(e, out, depth + 1);
        if (++i < j.size()) { out += ','; }
        out += '\n';
      }
      out.append(2 * static_cast<std::size_t>(depth), ' ');
      out += ']';
      return;
    }
    case value_t::number_float: {
      const double d = j.get<double>();
      out += std::isfinite(d) ? format_double(d) : "null";
      return;
    }
    default: out += j.dump(); return;
  }
}

}  // namespace detail

inline std::string dump_json(const nlohmann::ordered_json& j)
{
  std::string out;
  detail::dump_json_impl(j, out, 0);
  out += '\n';
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw ConfigError({"output path not writable: " + path.string()}); }
  out << content;
  if (!out.good()) { throw std::runtime_error("write failed: " + path.string()); }
}

inline nlohmann::ordered_json json_vector(const Vector& x)
{
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) { arr.push_back(x(i)); }
  return arr;
}

inline nlohmann::ordered_json report_to_json(const Population& pop, const RegularityReport& rep)
{
  nlohmann::ordered_json j;
  j["dimension"] = static_cast<std::int64_t>(pop.dimension());
  j["agents"] = static_cast<std::int64_t>(pop.agents.size());
  j["regularity"] = {
      {"is_contractive", rep.is_con},
      {"is_nonexpansive", rep.is_ne},
      {"is_firmly_nonexpansive", rep.is_fne},
      {"is_strictly_pseudocontractive", rep.is_spc},
      {"asymmetric_c", rep.asymmetric_c},
  };
  j["margins"] = {
      {"block_lambda_min", rep.margins.block_lambda_min},
      {"lipschitz_bound", rep.margins.lipschitz},
      {"contraction_margin", rep.margins.contraction},
      {"fne_order_lambda_min", rep.margins.fne_order_lambda_min},
      {"fne_shift_lambda_min", rep.margins.fne_shift_lambda_min},
      {"spc_order_lambda_min", rep.margins.spc_order_lambda_min},
  };
  nlohmann::ordered_json admissible = nlohmann::ordered_json::array();
  for (IterationKind k : admissible_iterations(rep)) { admissible.push_back(to_string(k)); }
  j["admissible_iterations"] = std::move(admissible);
  j["default_metric"] = to_string(default_metric(rep));
  return j;
}

inline nlohmann::ordered_json certificate_to_json(const NashCertificate& cert)
{
  nlohmann::ordered_json j;
  j["epsilon"] = cert.epsilon;
  j["max_raw_gap"] = cert.max_raw_gap;
  j["min_raw_gap"] = cert.min_raw_gap;
  j["residual"] = cert.residual;
  j["metric"] = to_string(cert.metric);
  j["z_bar"] = json_vector(cert.z_bar);
  j["aggregate"] = json_vector(cert.aggregate);
  nlohmann::ordered_json gaps = nlohmann::ordered_json::array();
  for (const AgentGap& g : cert.gaps) {
    gaps.push_back({{"id", g.id}, {"cost_broadcast", g.j_broadcast}, {"cost_best", g.j_best},
                    {"gap", g.gap}});
  }
  j["gaps"] = std::move(gaps);
  return j;
}

struct CommandContext
{
  std::filesystem::path out_dir = ".";
  bool force = false;
  std::ostream* diag = nullptr;
};

namespace detail {

inline void ensure_out_dir(const std::filesystem::path& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) { throw ConfigError({"cannot create output directory " + dir.string() + ": " + ec.message()}); }
}

inline void diag_line(const CommandContext& ctx, const std::string& line)
{
  if (ctx.diag != nullptr) { *ctx.diag << line << '\n'; }
}

/// Resolves auto iteration kind and metric against the classification and
/// enforces the admissibility gate unless forced.
inline IterationConfig resolve_iteration(const ScenarioConfig& cfg, const RegularityReport& rep,
                                         bool force)
{
  IterationConfig it = cfg.iteration;
  const std::vector<IterationKind> admissible = admissible_iterations(rep);
  if (cfg.iteration_auto) {
    if (admissible.empty()) {
      if (!force) {
        throw ConfigError(
            {"iteration: no scheme carries a convergence certificate for this game; pick one "
             "explicitly and pass --force to run anyway"});
      }
      it.kind = IterationKind::mann;
    } else {
      it.kind = admissible.front();
    }
  } else if (std::find(admissible.begin(), admissible.end(), it.kind) == admissible.end() && !force) {
    std::string certified;
    for (IterationKind k : admissible) {
      if (!certified.empty()) { certified += ", "; }
      certified += to_string(k);
    }
    throw ConfigError({std::string("iteration: ") + to_string(it.kind)
                       + " carries no convergence certificate for this game (certified: "
                       + (certified.empty() ? "none" : certified) + "); pass --force to run anyway"});
  }
  if (cfg.metric_auto) { it.metric = default_metric(rep); }
  it.record_z = cfg.trace_z;
  validate_iteration_config(it, /*strict_schedules=*/true);
  return it;
}

inline NashOptions nash_options(const IterationConfig& it)
{
  NashOptions opts;
  opts.threads = it.threads;
  opts.metric = it.metric;
  opts.qp = it.qp;
  return opts;
}

inline std::int64_t total_qp_iterations(const ConvergenceTrace& trace)
{
  std::int64_t total = 0;
  for (const TraceRecord& rec : trace.records) { total += rec.qp_iterations; }
  return total;
}

/// Optimal cost of the reference agent with expected constraints at the
/// broadcast z, used to normalize equilibrium quality in sweeps.
inline double homogeneous_reference_cost(const ScenarioConfig& cfg, const Population& pop,
                                         const Vector& z)
{
  Agent ref;
  ref.id = -1;
  if (cfg.kind == ScenarioKind::production_planning) {
    ProductionPlanningSpec spec = cfg.production;
    spec.seed = cfg.seed;
    spec.count = 1;
    const LqSpec lq = production_planning_lq_spec(spec);
    ref.constraint = lq_agent_constraint(lq, production_planning_homogeneous_agent(spec));
  } else {
    const Eigen::Index horizon = pop.dimension();
    const Vector caps = (cfg.pev.spec.upper_bounds.size() == 1) ? cfg.pev.spec.upper_bounds.front()
                                                                : Vector(Vector::Ones(horizon));
    ref.constraint = make_budget_box(Vector::Zero(horizon), caps, Vector::Ones(horizon),
                                     0.5 * (cfg.pev.gamma_lo + cfg.pev.gamma_hi));
  }
  const ResponseContext ctx(pop.params);
  const QpSolver solver(cfg.iteration.qp);
  const Vector x = ctx.optimal_response(ref, z, solver);
  return cost_value(pop.params, x, z);
}

}  // namespace detail

inline int classify_command(const ScenarioConfig& cfg, const CommandContext& ctx)
{
  const Population pop = build_population(cfg);
  const RegularityReport rep = classify(pop.params);
  detail::ensure_out_dir(ctx.out_dir);
  write_text_file(ctx.out_dir / "report.json", dump_json(report_to_json(pop, rep)));
  std::string regimes;
  if (rep.is_con) { regimes += " contractive"; }
  if (rep.is_ne) { regimes += " nonexpansive"; }
  if (rep.is_fne) { regimes += " firmly-nonexpansive"; }
  if (rep.is_spc) { regimes += " strictly-pseudocontractive"; }
  detail::diag_line(ctx, "classified:" + (regimes.empty() ? " no certificate" : regimes));
  return kExitConverged;
}

inline int run_command(const ScenarioConfig& cfg, const CommandContext& ctx)
{
  const Population pop = build_population(cfg);
  const RegularityReport rep = classify(pop.params);
  const IterationConfig it = detail::resolve_iteration(cfg, rep, ctx.force);

  const ConvergenceTrace trace = run(pop, it);
  const NashCertificate cert = epsilon_nash(pop, trace.z_final, detail::nash_options(it));

  detail::ensure_out_dir(ctx.out_dir);
  write_text_file(ctx.out_dir / "report.json", dump_json(report_to_json(pop, rep)));
  {
    std::ostringstream csv;
    write_trace_csv(trace, csv, cfg.trace_z);
    write_text_file(ctx.out_dir / "trace.csv", csv.str());
  }
  write_text_file(ctx.out_dir / "certificate.json", dump_json(certificate_to_json(cert)));

  int code = kExitNotConverged;
  if (trace.status == RunStatus::converged) {
    code = std::isfinite(cert.epsilon) ? kExitConverged : kExitNumericalFailure;
  }

  nlohmann::ordered_json summary;
  summary["scenario"] = to_string(cfg.kind);
  summary["iteration"] = to_string(it.kind);
  summary["metric"] = to_string(it.metric);
  summary["status"] = to_string(trace.status);
  summary["iterations"] = trace.iterations();
  summary["final_residual"] = trace.final_residual();
  summary["final_step_norm"] = trace.records.empty() ? 0.0 : trace.records.back().step_norm;
  summary["epsilon_nash"] = cert.epsilon;
  summary["qp_iterations_total"] = detail::total_qp_iterations(trace);
  if (cfg.kind == ScenarioKind::pev) {
    const Vector demand = pev_demand(cfg);
    const std::vector<bool> mask = active_charging_mask(trace.z_final);
    const bool any_active = std::any_of(mask.begin(), mask.end(), [](bool b) { return b; });
    if (any_active) {
      summary["valley_filling_gap"] =
          valley_filling_gap(trace.z_final, cfg.pev.spec.price_slope, demand, mask);
    } else {
      summary["valley_filling_gap"] = nullptr;
    }
  }
  summary["exit_code"] = code;
  summary["z_bar"] = json_vector(trace.z_final);
  write_text_file(ctx.out_dir / "summary.json", dump_json(summary));

  std::ostringstream line;
  line << to_string(it.kind) << ": " << to_string(trace.status) << " after " << trace.iterations()
       << " iterations, residual " << trace.final_residual() << ", epsilon " << cert.epsilon;
  detail::diag_line(ctx, line.str());
  return code;
}

inline int verify_command(const ScenarioConfig& cfg, const Vector& z_bar, const CommandContext& ctx)
{
  const Population pop = build_population(cfg);
  if (z_bar.size() != pop.dimension()) {
    throw ConfigError({"verify-nash: candidate has dimension " + std::to_string(z_bar.size())
                       + " but the game has dimension " + std::to_string(pop.dimension())});
  }
  const RegularityReport rep = classify(pop.params);
  IterationConfig it = cfg.iteration;
  if (cfg.metric_auto) { it.metric = default_metric(rep); }

  const NashCertificate cert = epsilon_nash(pop, z_bar, detail::nash_options(it));
  detail::ensure_out_dir(ctx.out_dir);
  write_text_file(ctx.out_dir / "certificate.json", dump_json(certificate_to_json(cert)));

  std::ostringstream line;
  line << "epsilon " << cert.epsilon << ", residual " << cert.residual;
  detail::diag_line(ctx, line.str());
  return std::isfinite(cert.epsilon) ? kExitConverged : kExitNumericalFailure;
}

inline int sweep_command(const ScenarioConfig& cfg, const CommandContext& ctx)
{
  if (cfg.sweep_populations.empty()) {
    throw ConfigError({"sweep.populations: required for the sweep command"});
  }
  if (cfg.kind != ScenarioKind::pev && cfg.kind != ScenarioKind::production_planning) {
    throw ConfigError({"sweep: only the seeded scenario families (pev, production_planning) "
                       "can be swept over population size"});
  }
  if (cfg.kind == ScenarioKind::pev && !cfg.pev.spec.gammas.empty()) {
    throw ConfigError({"sweep: explicit gammas pin the population; drop them to sweep sizes"});
  }

  detail::ensure_out_dir(ctx.out_dir);
  std::string csv = "N,epsilon_N,epsilon_N_normalized,iterations,final_residual\n";
  int code = kExitConverged;
  bool wrote_report = false;

  for (const int n_agents : cfg.sweep_populations) {
    ScenarioConfig sized = cfg;
    if (cfg.kind == ScenarioKind::pev) { sized.pev.agents = n_agents; }
    else { sized.production.count = n_agents; }

    const Population pop = build_population(sized);
    const RegularityReport rep = classify(pop.params);
    if (!wrote_report) {
      write_text_file(ctx.out_dir / "report.json", dump_json(report_to_json(pop, rep)));
      wrote_report = true;
    }
    const IterationConfig it = detail::resolve_iteration(sized, rep, ctx.force);
    const ConvergenceTrace trace = run(pop, it);
    const NashCertificate cert = epsilon_nash(pop, trace.z_final, detail::nash_options(it));

    write_text_file(ctx.out_dir / ("certificate_N" + std::to_string(n_agents) + ".json"),
                    dump_json(certificate_to_json(cert)));

    const double j_ref = detail::homogeneous_reference_cost(sized, pop, trace.z_final);
    const double normalized =
        (std::abs(j_ref) > 0.0) ? cert.epsilon / std::abs(j_ref) : cert.epsilon;

    csv += std::to_string(n_agents) + ',' + format_double(cert.epsilon) + ','
           + format_double(normalized) + ',' + std::to_string(trace.iterations()) + ','
           + format_double(trace.final_residual()) + '\n';

    if (trace.status != RunStatus::converged) { code = std::max(code, kExitNotConverged); }
    if (!std::isfinite(cert.epsilon)) { code = kExitNumericalFailure; }

    std::ostringstream line;
    line << "N=" << n_agents << ": " << to_string(trace.status) << " after " << trace.iterations()
         << " iterations, epsilon " << cert.epsilon;
    detail::diag_line(ctx, line.str());
  }

  write_text_file(ctx.out_dir / "sweep.csv", csv);
  return code;
}

/// Reads a fixed-point candidate: either a bare JSON array or any object
/// with a "z_bar" array (a summary or certificate artifact works directly).
inline Vector read_z_bar_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw ConfigError({"candidate file not readable: " + path.string()}); }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({"candidate file " + path.string() + ": malformed JSON: " + e.what()});
  }
  const nlohmann::json* arr = nullptr;
  if (doc.is_array()) { arr = &doc; }
  else if (doc.is_object() && doc.contains("z_bar") && doc["z_bar"].is_array()) { arr = &doc["z_bar"]; }
  if (arr == nullptr) {
    throw ConfigError({"candidate file " + path.string() + ": expected an array or a \"z_bar\" array"});
  }
  Vector z(static_cast<Eigen::Index>(arr->size()));
  Eigen::Index i = 0;
  for (const nlohmann::json& e : *arr) {
    if (!e.is_number()) {
      throw ConfigError({"candidate file " + path.string() + ": entries must be numbers"});
    }
    z(i++) = e.get<double>();
  }
  return z;
}

}  // namespace mfg
