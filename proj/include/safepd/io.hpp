#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "safepd/core.hpp"
#include "safepd/kkt.hpp"
#include "safepd/trace.hpp"

namespace safepd {

inline constexpr int kTraceSchemaVersion = 1;

/// Everything needed to reproduce one solve, apart from the seed.
struct RunConfig {
  std::string problem = "quadratic";
  int dim = 2;
  double problem_param = std::numeric_limits<double>::quiet_NaN();  ///< NaN: benchmark default
  double sigma = 0.0;
  double sigma_hat = 0.0;
  std::vector<std::string> algorithms{"scsa"};
  double eps_p = 0.05;
  double eps_c = 0.05;
  double eps = 0.2;
  double delta = 0.01;
  std::int64_t max_oracle_calls = 10'000'000;
  std::uint64_t seed = 1;
  std::int64_t seeds = 1;
  std::string feedback = "first_order";
  double fd_h = 1e-3;
  double rho_f = 0.0;
  double rho_g = 0.0;
  int max_rounds = 1000;
  double barrier_eta = 0.05;
  double lbsgd_step = 0.05;
  std::int64_t smoothing_n_mc = 100;
  bool write_ledgers = false;  ///< bench only

  void validate() const {
    require(dim > 0, "dim must be positive");
    require(sigma >= 0 && sigma_hat >= 0 && std::isfinite(sigma) && std::isfinite(sigma_hat),
            "noise levels must be finite and non-negative");
    require(!algorithms.empty(), "at least one algorithm is required");
    for (const std::string& a : algorithms) {
      require(a == "scsa" || a == "convex" || a == "safepd" || a == "lbsgd",
              "unknown algorithm '" + a + "' (expected scsa, convex, safepd or lbsgd)");
    }
    require(eps_p > 0 && eps_c > 0 && eps > 0, "accuracy targets must be positive");
    require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
    require(max_oracle_calls > 0, "max_oracle_calls must be positive");
    require(seeds >= 0, "seeds must be non-negative");
    require(feedback == "first_order" || feedback == "zeroth_order",
            "feedback must be first_order or zeroth_order");
    require(fd_h > 0, "fd_h must be positive");
    require(max_rounds >= 1 && smoothing_n_mc >= 1, "max_rounds and smoothing_n_mc must be positive");
    require(barrier_eta > 0 && lbsgd_step > 0, "barrier parameters must be positive");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == v.size() && used > 0, "config key '" + key + "': expected a number, got '" + v + "'");
  return d;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  require(d == std::floor(d) && std::abs(d) < 9e18, "config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<std::int64_t>(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InputError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<std::string> parse_list(std::string v) {
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Applies one key/value pair; unknown keys are rejected.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = unquote(raw);
  if (key == "problem") c.problem = v;
  else if (key == "dim") c.dim = static_cast<int>(parse_int(key, v));
  else if (key == "problem_param") c.problem_param = parse_double(key, v);
  else if (key == "sigma") c.sigma = parse_double(key, v);
  else if (key == "sigma_hat") c.sigma_hat = parse_double(key, v);
  else if (key == "algorithm" || key == "algorithms") c.algorithms = parse_list(raw);
  else if (key == "eps_p") c.eps_p = parse_double(key, v);
  else if (key == "eps_c") c.eps_c = parse_double(key, v);
  else if (key == "eps") c.eps = parse_double(key, v);
  else if (key == "delta") c.delta = parse_double(key, v);
  else if (key == "max_oracle_calls") c.max_oracle_calls = parse_int(key, v);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "seeds") c.seeds = parse_int(key, v);
  else if (key == "feedback") c.feedback = v;
  else if (key == "fd_h") c.fd_h = parse_double(key, v);
  else if (key == "rho_f") c.rho_f = parse_double(key, v);
  else if (key == "rho_g") c.rho_g = parse_double(key, v);
  else if (key == "max_rounds") c.max_rounds = static_cast<int>(parse_int(key, v));
  else if (key == "barrier_eta") c.barrier_eta = parse_double(key, v);
  else if (key == "lbsgd_step") c.lbsgd_step = parse_double(key, v);
  else if (key == "smoothing_n_mc") c.smoothing_n_mc = parse_int(key, v);
  else if (key == "write_ledgers") c.write_ledgers = parse_bool(key, v);
  else throw InputError("unknown config key '" + key + "'");
}

/// Flat `key = value` file; '#' starts a comment, blank lines are skipped.
inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    require(!key.empty() && !value.empty(), "config line " + std::to_string(lineno) + ": empty key or value");
    set_config_value(c, key, value);
  }
  c.validate();
  return c;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["problem"] = c.problem;
  j["dim"] = c.dim;
  j["problem_param"] = std::isnan(c.problem_param) ? nlohmann::json(nullptr) : nlohmann::json(c.problem_param);
  j["sigma"] = c.sigma;
  j["sigma_hat"] = c.sigma_hat;
  j["algorithms"] = c.algorithms;
  j["eps_p"] = c.eps_p;
  j["eps_c"] = c.eps_c;
  j["eps"] = c.eps;
  j["delta"] = c.delta;
  j["max_oracle_calls"] = c.max_oracle_calls;
  j["feedback"] = c.feedback;
  j["fd_h"] = c.fd_h;
  j["rho_f"] = c.rho_f;
  j["rho_g"] = c.rho_g;
  j["max_rounds"] = c.max_rounds;
  j["barrier_eta"] = c.barrier_eta;
  j["lbsgd_step"] = c.lbsgd_step;
  j["smoothing_n_mc"] = c.smoothing_n_mc;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.problem = j.at("problem").get<std::string>();
  c.dim = j.at("dim").get<int>();
  if (!j.at("problem_param").is_null()) c.problem_param = j.at("problem_param").get<double>();
  c.sigma = j.value("sigma", 0.0);
  c.sigma_hat = j.value("sigma_hat", 0.0);
  c.algorithms = j.value("algorithms", std::vector<std::string>{"scsa"});
  c.eps_p = j.value("eps_p", c.eps_p);
  c.eps_c = j.value("eps_c", c.eps_c);
  c.eps = j.value("eps", c.eps);
  c.delta = j.value("delta", c.delta);
  c.max_oracle_calls = j.value("max_oracle_calls", c.max_oracle_calls);
  c.feedback = j.value("feedback", c.feedback);
  c.fd_h = j.value("fd_h", c.fd_h);
  c.rho_f = j.value("rho_f", c.rho_f);
  c.rho_g = j.value("rho_g", c.rho_g);
  c.max_rounds = j.value("max_rounds", c.max_rounds);
  c.barrier_eta = j.value("barrier_eta", c.barrier_eta);
  c.lbsgd_step = j.value("lbsgd_step", c.lbsgd_step);
  c.smoothing_n_mc = j.value("smoothing_n_mc", c.smoothing_n_mc);
  return c;
}

namespace detail {

inline nlohmann::json vec_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector json_vec(const nlohmann::json& a) {
  Vector v(static_cast<int>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<int>(i)) = a[i].get<double>();
  return v;
}

inline nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline double num_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

/// Trace JSON. `extra` carries run metadata (config snapshot, final gap).
inline nlohmann::json trace_to_json(const RunTrace& t, const nlohmann::json& extra = nlohmann::json::object()) {
  using detail::num;
  using detail::vec_json;
  nlohmann::json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["algorithm"] = t.algorithm;
  j["problem"] = t.problem;
  j["dim"] = t.dim;
  j["seed"] = t.seed;
  j["outcome"] = to_string(t.outcome);
  j["diagnostic"] = t.diagnostic;
  j["x_final"] = vec_json(t.x_final);
  j["lambda_final"] = num(t.lambda_final);
  j["final_eta"] = num(t.final_eta);
  j["total_calls"] = t.total_calls;
  j["horizon"] = t.horizon;
  j["query_perturbation"] = t.query_perturbation;
  if (t.final_kkt) {
    j["final_kkt"] = {{"grad_norm", num(t.final_kkt->grad_norm)},
                      {"comp_slack", num(t.final_kkt->comp_slack)},
                      {"lambda_nonneg", num(t.final_kkt->lambda_nonneg)},
                      {"g_value", num(t.final_kkt->g_value)},
                      {"feasible", t.final_kkt->feasible}};
  } else {
    j["final_kkt"] = nullptr;
  }
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  nlohmann::json recs = nlohmann::json::array();
  for (const DualState& s : t.records) {
    recs.push_back({{"round", s.round},
                    {"t", s.t},
                    {"phase", to_string(s.phase)},
                    {"x", vec_json(s.x)},
                    {"lambda", num(s.lambda)},
                    {"lambda_next", num(s.lambda_next)},
                    {"g_hat", num(s.g_hat)},
                    {"eps", num(s.eps)},
                    {"safety_radius", num(s.safety_radius)},
                    {"eta", num(s.eta)},
                    {"ucb_samples", s.ucb_samples},
                    {"inner_calls", s.inner_calls},
                    {"inner_iterations", s.inner_iterations},
                    {"cumulative_calls", s.cumulative_calls},
                    {"ledger_begin", s.ledger_begin},
                    {"ledger_end", s.ledger_end},
                    {"x_next", vec_json(s.x_next)}});
  }
  j["records"] = std::move(recs);
  nlohmann::json rounds = nlohmann::json::array();
  for (const OuterState& o : t.rounds) {
    rounds.push_back({{"k", o.k},
                      {"x", vec_json(o.x)},
                      {"lambda", num(o.lambda)},
                      {"lambda_warm", num(o.lambda_warm)},
                      {"eta", num(o.eta)},
                      {"eta_warm", num(o.eta_warm)},
                      {"beta", num(o.beta)},
                      {"step_norm", num(o.step_norm)},
                      {"scsa_iterations", o.scsa_iterations},
                      {"cumulative_calls", o.cumulative_calls}});
  }
  j["rounds"] = std::move(rounds);
  return j;
}

inline RunTrace trace_from_json(const nlohmann::json& j) {
  using detail::json_vec;
  using detail::num_from;
  require(j.is_object(), "trace JSON must be an object");
  require(j.value("schema_version", -1) == kTraceSchemaVersion, "unsupported trace schema version");
  RunTrace t;
  try {
    t.algorithm = j.at("algorithm").get<std::string>();
    t.problem = j.at("problem").get<std::string>();
    t.dim = j.at("dim").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    t.diagnostic = j.at("diagnostic").get<std::string>();
    t.x_final = json_vec(j.at("x_final"));
    t.lambda_final = num_from(j.at("lambda_final"));
    t.final_eta = num_from(j.at("final_eta"));
    t.total_calls = j.at("total_calls").get<std::int64_t>();
    t.horizon = j.at("horizon").get<std::int64_t>();
    t.query_perturbation = j.at("query_perturbation").get<double>();
    if (!j.at("final_kkt").is_null()) {
      const auto& k = j.at("final_kkt");
      KKTResidual r;
      r.grad_norm = num_from(k.at("grad_norm"));
      r.comp_slack = num_from(k.at("comp_slack"));
      r.lambda_nonneg = num_from(k.at("lambda_nonneg"));
      r.g_value = num_from(k.at("g_value"));
      r.feasible = k.at("feasible").get<bool>();
      t.final_kkt = r;
    }
    for (const auto& r : j.at("records")) {
      DualState s;
      s.round = r.at("round").get<int>();
      s.t = r.at("t").get<std::int64_t>();
      s.phase = phase_from_string(r.at("phase").get<std::string>());
      s.x = json_vec(r.at("x"));
      s.lambda = num_from(r.at("lambda"));
      s.lambda_next = num_from(r.at("lambda_next"));
      s.g_hat = num_from(r.at("g_hat"));
      s.eps = num_from(r.at("eps"));
      s.safety_radius = num_from(r.at("safety_radius"));
      s.eta = num_from(r.at("eta"));
      s.ucb_samples = r.at("ucb_samples").get<std::int64_t>();
      s.inner_calls = r.at("inner_calls").get<std::int64_t>();
      s.inner_iterations = r.at("inner_iterations").get<std::int64_t>();
      s.cumulative_calls = r.at("cumulative_calls").get<std::int64_t>();
      s.ledger_begin = r.at("ledger_begin").get<std::int64_t>();
      s.ledger_end = r.at("ledger_end").get<std::int64_t>();
      s.x_next = json_vec(r.at("x_next"));
      t.records.push_back(std::move(s));
    }
    for (const auto& r : j.at("rounds")) {
      OuterState o;
      o.k = r.at("k").get<int>();
      o.x = json_vec(r.at("x"));
      o.lambda = num_from(r.at("lambda"));
      o.lambda_warm = num_from(r.at("lambda_warm"));
      o.eta = num_from(r.at("eta"));
      o.eta_warm = num_from(r.at("eta_warm"));
      o.beta = num_from(r.at("beta"));
      o.step_norm = num_from(r.at("step_norm"));
      o.scsa_iterations = r.at("scsa_iterations").get<std::int64_t>();
      o.cumulative_calls = r.at("cumulative_calls").get<std::int64_t>();
      t.rounds.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed trace JSON: ") + e.what());
  }
  return t;
}

/// n log-spaced call budgets from lo to hi (inclusive, rounded).
inline std::vector<std::int64_t> log_budgets(std::int64_t lo, std::int64_t hi, int n = 32) {
  require(lo >= 1 && hi >= lo && n >= 2, "log_budgets needs 1 <= lo <= hi and n >= 2");
  std::vector<std::int64_t> b(n);
  const double a = std::log(static_cast<double>(lo));
  const double z = std::log(static_cast<double>(hi));
  for (int i = 0; i < n; ++i) b[i] = static_cast<std::int64_t>(std::llround(std::exp(a + (z - a) * i / (n - 1.0))));
  b.back() = hi;
  return b;
}

}  // namespace safepd
