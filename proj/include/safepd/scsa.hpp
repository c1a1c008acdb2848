#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "safepd/core.hpp"
#include "safepd/inner.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/trace.hpp"

namespace safepd {

struct ScsaConfig {
  double eps_p = 0.05;
  double eps_c = 0.05;
  double delta = 0.01;
  /// Cap on the oracle's cumulative call count.
  std::int64_t max_oracle_calls = 10'000'000;
  /// Lower bound on the UCB accuracy eps_t; 0 selects eps_c / (8 lambda_check).
  double eps_floor = 0.0;
  /// Hard cap on outer iterations; 0 selects the horizon bound.
  std::int64_t max_outer = 0;

  void validate() const {
    require(eps_p > 0 && eps_c > 0, "eps_p and eps_c must be positive");
    require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
    require(max_oracle_calls > 0, "max_oracle_calls must be positive");
    require(eps_floor >= 0 && max_outer >= 0, "eps_floor and max_outer must be non-negative");
  }
};

struct ScsaResult {
  Vector x;
  double lambda = 0.0;
  RunTrace trace;
};

/// lambda_check = delta_f / alpha.
inline double initial_dual(double delta_f, double alpha) {
  require(alpha > 0, "alpha must be positive");
  require(delta_f >= 0, "delta_f must be non-negative");
  return delta_f / alpha;
}

/// Dual step size mu_f / (8 L_g^2).
inline double dual_step_size(double mu_f, double L_g) { return mu_f / (8.0 * L_g * L_g); }

/// lambda <- max(lambda + gamma g_hat, 0). g_hat > 0 means the certified
/// region was wrong.
inline double dual_step(double lambda_t, double g_hat_t, double mu_f, double L_g) {
  if (g_hat_t > 0) throw SafetyViolation("dual step with positive constraint estimate " + std::to_string(g_hat_t));
  return std::max(lambda_t + dual_step_size(mu_f, L_g) * g_hat_t, 0.0);
}

/// Radius -g_hat / (2 L_g) of the ball certified feasible around x_t.
inline double safety_radius(double g_hat_t, double L_g) {
  if (!(g_hat_t < 0)) {
    throw SafetyViolation("empty safety region: constraint estimate " + std::to_string(g_hat_t) + " >= 0");
  }
  require(L_g > 0, "L_g must be positive");
  return -g_hat_t / (2.0 * L_g);
}

/// True when the next primal solve is the terminal one.
inline bool is_terminal_step(double g_hat_t, double lambda_next, double eps_c) {
  return -g_hat_t * lambda_next <= eps_c;
}

/// mu_f g_hat^2 / (128 L_g^2) while -g_hat lambda_next > eps_c, otherwise
/// min(mu_f eps_p^2 / M_L^2, eps_c) with M_L = M_f + lambda_next M_g.
inline double eta_schedule(double g_hat_t, double lambda_next, const ScsaConfig& cfg, const ProblemInfo& in) {
  if (!is_terminal_step(g_hat_t, lambda_next, cfg.eps_c)) {
    return in.mu_f * g_hat_t * g_hat_t / (128.0 * in.L_g * in.L_g);
  }
  const double M_L = in.M_f + lambda_next * in.M_g;
  return std::min(in.mu_f * cfg.eps_p * cfg.eps_p / (M_L * M_L), cfg.eps_c);
}

/// max(-g_hat_prev / 8, eps_floor). The first iteration passes -alpha.
inline double eps_schedule(double g_hat_prev, double eps_floor) { return std::max(-g_hat_prev / 8.0, eps_floor); }

inline double default_eps_floor(const ScsaConfig& cfg, double lambda_check) {
  if (cfg.eps_floor > 0) return cfg.eps_floor;
  return lambda_check > 0 ? cfg.eps_c / (8.0 * lambda_check) : cfg.eps_c / 8.0;
}

/// Lower bound on the local strong concavity of the dual at lambda.
inline double dual_curvature_bound(const ProblemInfo& in, double lambda) {
  return in.beta * in.beta / (4.0 * in.R * in.R * (in.M_f + lambda * in.M_g));
}

/// Two-phase outer iteration bound
///   8 L_g^2 lc / (beta mu_f) + 16 L_g^2 / (mu_d mu_f) ln(max(Gbar lc, 4 L_g^2 lc^2 / mu_f) / eps_c)
/// with mu_d the curvature bound at lc and Gbar = 2 beta bounding -g_hat.
inline std::int64_t horizon_bound(const ProblemInfo& in, double lambda_check, const ScsaConfig& cfg) {
  require(in.mu_f > 0, "horizon bound needs a strongly convex objective");
  require(in.beta > 0 && in.R > 0 && in.L_g > 0, "horizon bound needs positive beta, R, L_g");
  const double Lg2 = in.L_g * in.L_g;
  const double first = 8.0 * Lg2 * lambda_check / (in.beta * in.mu_f);
  const double mu_d = dual_curvature_bound(in, lambda_check);
  const double G_bar = 2.0 * in.beta;
  const double scale = std::max(G_bar * lambda_check, 4.0 * Lg2 * lambda_check * lambda_check / in.mu_f);
  const double second = 16.0 * Lg2 / (mu_d * in.mu_f) * std::max(0.0, std::log(scale / cfg.eps_c));
  const double total = std::ceil(first + second);
  constexpr double kCap = 1e15;
  return static_cast<std::int64_t>(std::clamp(total, 1.0, kCap));
}

namespace detail {

struct OuterLoopResult {
  Vector x;
  double lambda = 0.0;
  double eta = 0.0;
  Outcome outcome = Outcome::Converged;
  std::string diagnostic;
  std::int64_t iterations = 0;
};

/// Outer dual loop from (x, lambda). Appends one DualState per iteration.
inline OuterLoopResult scsa_outer_loop(const ProblemInfo& in, FirstOrderOracle& oracle, const ScsaConfig& cfg,
                                       Vector x, double lambda, std::int64_t T_max, std::int64_t max_outer,
                                       double eps_floor, int round, RunTrace& trace, Rng& rng) {
  const LagrangianConstants lc = LagrangianConstants::from(in);
  OuterLoopResult out;
  double g_prev = -in.alpha;
  auto stop = [&](Outcome o, std::string why) {
    out.x = x;
    out.lambda = lambda;
    out.outcome = o;
    out.diagnostic = std::move(why);
    return out;
  };

  for (std::int64_t t = 1; t <= max_outer; ++t) {
    const double eps_t = eps_schedule(g_prev, eps_floor);
    const std::int64_t n = ucb_sample_size(oracle.value_sigma(), eps_t, T_max, cfg.delta);
    if (oracle.calls() + n > cfg.max_oracle_calls) {
      return stop(Outcome::BudgetExceeded, "oracle budget exhausted before constraint estimate");
    }
    const UcbEstimate ucb = estimate_constraint_ucb(oracle, x, eps_t, T_max, cfg.delta, rng);
    if (!(ucb.g_hat < 0)) {
      return stop(Outcome::SafetyAbort,
                  "constraint upper bound " + std::to_string(ucb.g_hat) + " >= 0 at outer iteration " +
                      std::to_string(t));
    }
    DualState s;
    s.round = round;
    s.t = t;
    s.x = x;
    s.lambda = lambda;
    s.g_hat = ucb.g_hat;
    s.eps = eps_t;
    s.ucb_samples = ucb.n_used;
    s.safety_radius = safety_radius(ucb.g_hat, in.L_g);
    s.lambda_next = dual_step(lambda, ucb.g_hat, in.mu_f, in.L_g);
    const bool terminal = is_terminal_step(ucb.g_hat, s.lambda_next, cfg.eps_c);
    s.phase = terminal ? Phase::Terminal : Phase::Outer;
    s.eta = eta_schedule(ucb.g_hat, s.lambda_next, cfg, in);

    PsgdOptions po;
    po.max_calls = cfg.max_oracle_calls - oracle.calls();
    // x_{lambda_next} lies in the ball, so every ball point is within 2r of
    // the minimizer.
    po.grad_norm_bound = lc.M(s.lambda_next) * 2.0 * s.safety_radius;
    const Ball ball{x, s.safety_radius};
    const InnerReport rep = psgd_solve(oracle, s.lambda_next, ball, x, s.eta, lc, rng, po);

    s.inner_calls = rep.oracle_calls;
    s.inner_iterations = rep.iterations;
    s.ledger_begin = rep.ledger_begin;
    s.ledger_end = rep.ledger_end;
    s.x_next = rep.x_out;
    s.cumulative_calls = oracle.calls();
    trace.records.push_back(s);

    x = rep.x_out;
    lambda = s.lambda_next;
    g_prev = ucb.g_hat;
    out.eta = s.eta;
    out.iterations = t;
    if (rep.terminated_by == InnerTermination::Budget) {
      return stop(Outcome::BudgetExceeded, "oracle budget exhausted inside the primal solve");
    }
    if (terminal) return stop(Outcome::Converged, "");
  }
  return stop(Outcome::HorizonReached, "outer iteration bound reached");
}

inline void finalize_trace(RunTrace& trace, const detail::OuterLoopResult& r, const ValueOracle& oracle) {
  trace.outcome = r.outcome;
  trace.diagnostic = r.diagnostic;
  trace.x_final = r.x;
  trace.lambda_final = r.lambda;
  trace.final_eta = r.eta;
  trace.total_calls = oracle.calls();
}

}  // namespace detail

/// Outer loop of SCSA started directly from (x1, lambda1), without the
/// preliminary descent. lambda1 plays the role of lambda_check.
inline ScsaResult scsa_solve_from(const ProblemInfo& in, FirstOrderOracle& oracle, const ScsaConfig& cfg,
                                  const Vector& x1, double lambda1, Rng& rng, int round = 0) {
  cfg.validate();
  require(in.mu_f > 0, "SCSA needs a strongly convex objective");
  require(lambda1 >= 0, "initial multiplier must be non-negative");
  require_dim(x1, oracle.dim(), "SCSA start");
  ScsaResult res;
  res.trace.algorithm = "scsa";
  res.trace.problem = in.name;
  res.trace.dim = in.dim;
  res.trace.horizon = horizon_bound(in, std::max(lambda1, 1e-12), cfg);
  const std::int64_t max_outer = cfg.max_outer > 0 ? cfg.max_outer : res.trace.horizon;
  const detail::OuterLoopResult r =
      detail::scsa_outer_loop(in, oracle, cfg, x1, lambda1, res.trace.horizon, max_outer,
                              default_eps_floor(cfg, lambda1), round, res.trace, rng);
  detail::finalize_trace(res.trace, r, oracle);
  res.x = r.x;
  res.lambda = r.lambda;
  return res;
}

/// SCSA: safe initialization by descent on L(., lambda_check), then dual
/// ascent with primal solves restricted to certified safety balls.
inline ScsaResult scsa_solve(const ProblemInfo& in, FirstOrderOracle& oracle, const ScsaConfig& cfg, Rng& rng) {
  cfg.validate();
  require(in.mu_f > 0, "SCSA needs a strongly convex objective");
  require(in.alpha > 0 && in.L_g > 0, "SCSA needs positive alpha and L_g");
  require_dim(in.x_start, oracle.dim(), "x_start");

  ScsaResult res;
  RunTrace& trace = res.trace;
  trace.algorithm = "scsa";
  trace.problem = in.name;
  trace.dim = in.dim;
  const double lambda_check = initial_dual(in.delta_f, in.alpha);
  trace.horizon = horizon_bound(in, lambda_check, cfg);
  const std::int64_t max_outer = cfg.max_outer > 0 ? cfg.max_outer : trace.horizon;

  DescentOptions dopt;
  dopt.max_calls = cfg.max_oracle_calls - oracle.calls();
  dopt.T_max = trace.horizon;
  dopt.delta = cfg.delta;
  const double eta_check = in.mu_f * in.alpha * in.alpha / (8.0 * in.L_g * in.L_g);
  const InnerReport pre =
      descent_msgd(oracle, lambda_check, in.x_start, eta_check, LagrangianConstants::from(in), rng, dopt);

  DualState s;
  s.t = 0;
  s.phase = Phase::Preliminary;
  s.x = in.x_start;
  s.lambda = lambda_check;
  s.lambda_next = lambda_check;
  s.eta = eta_check;
  s.inner_calls = pre.oracle_calls;
  s.inner_iterations = pre.iterations;
  s.ledger_begin = pre.ledger_begin;
  s.ledger_end = pre.ledger_end;
  s.x_next = pre.x_out;
  s.cumulative_calls = oracle.calls();
  trace.records.push_back(s);

  detail::OuterLoopResult r;
  if (pre.terminated_by == InnerTermination::Budget) {
    r.x = pre.x_out;
    r.lambda = lambda_check;
    r.outcome = Outcome::BudgetExceeded;
    r.diagnostic = "oracle budget exhausted during the preliminary descent";
  } else {
    r = detail::scsa_outer_loop(in, oracle, cfg, pre.x_out, lambda_check, trace.horizon, max_outer,
                                default_eps_floor(cfg, lambda_check), 0, trace, rng);
  }
  detail::finalize_trace(trace, r, oracle);
  res.x = r.x;
  res.lambda = r.lambda;
  return res;
}

/// Number of dual iterations recorded in a trace.
inline std::int64_t outer_iterations(const RunTrace& trace) {
  return std::count_if(trace.records.begin(), trace.records.end(),
                       [](const DualState& s) { return s.phase == Phase::Outer || s.phase == Phase::Terminal; });
}

}  // namespace safepd
