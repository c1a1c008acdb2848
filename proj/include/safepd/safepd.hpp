#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "safepd/core.hpp"
#include "safepd/inner.hpp"
#include "safepd/kkt.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/scsa.hpp"
#include "safepd/trace.hpp"

namespace safepd {

/// Proximal subproblem around a center:
///   min f + rho_f/2 |x - c|^2  s.t.  g + rho_g/2 |x - c|^2 <= 0.
struct ProxSubproblem {
  ProblemSpec spec;  ///< regularized view; info holds the derived constants
  Vector center;
  double rho_f = 0.0;
  double rho_g = 0.0;
};

/// Constants of the proximal subproblem as a strongly convex problem. The
/// regularized feasible set lies within sqrt(8 beta / mu_g) of the center,
/// with beta the base depth bound (the regularized constraint is never
/// deeper than g itself). depth is -g_hat at the center.
inline ProblemInfo build_subproblem_info(const ProblemInfo& base, const Vector& center, double rho_f, double rho_g,
                                         double depth) {
  require(rho_f > base.M_f, "rho_f must exceed M_f");
  require(rho_g > base.M_g, "rho_g must exceed M_g");
  require(depth > 0, "the proximal center must be strictly feasible");
  require_dim(center, base.dim, "proximal center");
  ProblemInfo in = base;
  in.name = base.name + "/prox";
  in.convexity = ConvexityClass::StronglyConvex;
  in.mu_f = rho_f - base.M_f;
  in.M_f = rho_f + base.M_f;
  in.mu_g = rho_g - base.M_g;
  in.M_g = rho_g + base.M_g;
  const double R_k = std::sqrt(8.0 * std::max(base.beta, depth) / in.mu_g);
  in.R = R_k;
  in.L_g = base.L_g + rho_g * R_k;
  in.G_g = base.G_g + rho_g * R_k;
  in.G_f = base.G_f + rho_f * R_k;
  in.alpha = depth;
  in.beta = std::max(base.beta, depth);
  in.delta_f = base.delta_f + 0.5 * rho_f * R_k * R_k;
  in.x_start = center;
  return in;
}

/// Regularized view of an analytic problem. Uses the true depth -g(center).
inline ProxSubproblem build_subproblem(const ProblemSpec& base, const Vector& center, double rho_f, double rho_g) {
  const double depth = -eval_true(base, center).g.value;
  ProxSubproblem p;
  p.center = center;
  p.rho_f = rho_f;
  p.rho_g = rho_g;
  p.spec.info = build_subproblem_info(base.info, center, rho_f, rho_g, depth);
  auto f = base.objective;
  auto g = base.constraint;
  p.spec.objective = [f, center, rho_f](const Vector& x) {
    EvalPair e = f(x);
    const Vector d = x - center;
    e.value += 0.5 * rho_f * d.squaredNorm();
    e.gradient += rho_f * d;
    return e;
  };
  p.spec.constraint = [g, center, rho_g](const Vector& x) {
    EvalPair e = g(x);
    const Vector d = x - center;
    e.value += 0.5 * rho_g * d.squaredNorm();
    e.gradient += rho_g * d;
    return e;
  };
  return p;
}

/// 2 lambda_k + rho_f / rho_g + (eta_k + eta_check_next) / (-g_hat_k).
inline double warm_start_dual(double lambda_k, double rho_f, double rho_g, double eta_k, double eta_check_next,
                              double g_hat_k) {
  if (!(g_hat_k < 0)) {
    throw SafetyViolation("warm start at a point with constraint estimate " + std::to_string(g_hat_k) + " >= 0");
  }
  require(rho_g > 0, "rho_g must be positive");
  return 2.0 * lambda_k + rho_f / rho_g + (eta_k + eta_check_next) / (-g_hat_k);
}

inline double stopping_threshold(double eps_p, double eps_c, double lambda_check_k, double rho_f, double rho_g) {
  return std::min(eps_p / (rho_f + lambda_check_k * rho_g), std::sqrt(2.0 * eps_c / (lambda_check_k * rho_g)));
}

/// |x_k - x_{k-1}| <= min(eps_p / (rho_f + lc rho_g), sqrt(2 eps_c / (lc rho_g))).
inline bool stopping_check(double step_norm, double eps_p, double eps_c, double lambda_check_k, double rho_f,
                           double rho_g) {
  return step_norm <= stopping_threshold(eps_p, eps_c, lambda_check_k, rho_f, rho_g);
}

struct SafePdConfig {
  ScsaConfig scsa;
  /// 0 selects 2 M_f / 2 M_g.
  double rho_f = 0.0;
  double rho_g = 0.0;
  int max_rounds = 1000;
};

/// SafePD: proximal rounds around a moving center, each solved by SCSA
/// from a warm-started dual. Queries stay feasible for the original
/// constraint because the proximal term is non-negative.
inline ScsaResult safepd_solve(const ProblemInfo& in, FirstOrderOracle& oracle, const SafePdConfig& cfg, Rng& rng) {
  cfg.scsa.validate();
  require(cfg.max_rounds >= 1, "max_rounds must be at least 1");
  const double rho_f = cfg.rho_f > 0 ? cfg.rho_f : 2.0 * in.M_f;
  const double rho_g = cfg.rho_g > 0 ? cfg.rho_g : 2.0 * in.M_g;
  require(rho_f >= 2.0 * in.M_f && rho_g >= 2.0 * in.M_g, "SafePD needs rho_f >= 2 M_f and rho_g >= 2 M_g");
  require_dim(in.x_start, oracle.dim(), "x_start");

  ScsaResult res;
  RunTrace& trace = res.trace;
  trace.algorithm = "safepd";
  trace.problem = in.name;
  trace.dim = in.dim;
  trace.horizon = cfg.max_rounds;
  const ScsaConfig& sc = cfg.scsa;
  const std::int64_t T_round = cfg.max_rounds;

  Vector x = in.x_start;
  double lambda = 0.0;
  auto finish = [&](Outcome o, std::string why) {
    trace.outcome = o;
    trace.diagnostic = std::move(why);
    trace.x_final = x;
    trace.lambda_final = lambda;
    trace.total_calls = oracle.calls();
    res.x = x;
    res.lambda = lambda;
    return res;
  };

  double eps0 = in.alpha / 8.0;
  if (oracle.calls() + ucb_sample_size(oracle.value_sigma(), eps0, T_round, sc.delta) > sc.max_oracle_calls) {
    return finish(Outcome::BudgetExceeded, "oracle budget exhausted before the first constraint estimate");
  }
  double g_hat = estimate_constraint_ucb(oracle, x, eps0, T_round, sc.delta, rng).g_hat;
  if (!(g_hat < 0)) return finish(Outcome::SafetyAbort, "constraint upper bound at x_start is not negative");
  double lambda_check = in.delta_f / (-g_hat);

  for (int k = 1; k <= cfg.max_rounds; ++k) {
    const double beta_k = -g_hat;
    const ProblemInfo sub = build_subproblem_info(in, x, rho_f, rho_g, beta_k);
    ProximalOracle prox(oracle, x, rho_f, rho_g);
    const LagrangianConstants lc = LagrangianConstants::from(sub);

    const double eta_check = sub.mu_f * beta_k * beta_k / (8.0 * sub.L_g * sub.L_g);
    DescentOptions dopt;
    dopt.max_calls = sc.max_oracle_calls - oracle.calls();
    dopt.T_max = std::max<std::int64_t>(T_round, horizon_bound(sub, lambda_check, sc));
    dopt.delta = sc.delta;
    const InnerReport pre = descent_msgd(prox, lambda_check, x, eta_check, lc, rng, dopt);

    DualState d;
    d.round = k;
    d.t = 0;
    d.phase = Phase::Preliminary;
    d.x = x;
    d.lambda = lambda_check;
    d.lambda_next = lambda_check;
    d.eta = eta_check;
    d.inner_calls = pre.oracle_calls;
    d.inner_iterations = pre.iterations;
    d.ledger_begin = pre.ledger_begin;
    d.ledger_end = pre.ledger_end;
    d.x_next = pre.x_out;
    d.cumulative_calls = oracle.calls();
    trace.records.push_back(d);
    if (pre.terminated_by == InnerTermination::Budget) {
      return finish(Outcome::BudgetExceeded, "oracle budget exhausted in round " + std::to_string(k));
    }

    const ScsaResult inner = scsa_solve_from(sub, prox, sc, pre.x_out, lambda_check, rng, k);
    for (const DualState& s : inner.trace.records) trace.records.push_back(s);

    OuterState o;
    o.k = k;
    o.x = inner.x;
    o.lambda = inner.lambda;
    o.lambda_warm = lambda_check;
    o.eta = inner.trace.final_eta;
    o.eta_warm = eta_check;
    o.beta = beta_k;
    o.step_norm = (inner.x - x).norm();
    o.scsa_iterations = outer_iterations(inner.trace);
    o.cumulative_calls = oracle.calls();
    trace.rounds.push_back(o);

    if (inner.trace.outcome != Outcome::Converged) {
      x = inner.x;
      lambda = inner.lambda;
      return finish(inner.trace.outcome, "round " + std::to_string(k) + ": " + inner.trace.diagnostic);
    }
    const bool done = stopping_check(o.step_norm, sc.eps_p, sc.eps_c, lambda_check, rho_f, rho_g);
    x = inner.x;
    lambda = inner.lambda;
    if (done) return finish(Outcome::Converged, "");

    const double eps_k = std::max(beta_k / 8.0, default_eps_floor(sc, lambda_check));
    if (oracle.calls() + ucb_sample_size(oracle.value_sigma(), eps_k, T_round, sc.delta) > sc.max_oracle_calls) {
      return finish(Outcome::BudgetExceeded, "oracle budget exhausted after round " + std::to_string(k));
    }
    g_hat = estimate_constraint_ucb(oracle, x, eps_k, T_round, sc.delta, rng).g_hat;
    if (!(g_hat < 0)) {
      return finish(Outcome::SafetyAbort, "constraint upper bound not negative after round " + std::to_string(k));
    }
    const ProblemInfo next = build_subproblem_info(in, x, rho_f, rho_g, -g_hat);
    const double eta_check_next = next.mu_f * g_hat * g_hat / (8.0 * next.L_g * next.L_g);
    lambda_check = warm_start_dual(lambda, rho_f, rho_g, o.eta, eta_check_next, g_hat);
  }
  return finish(Outcome::OuterCapReached, "proximal round cap reached");
}

/// Convex problems: SCSA on f + eps / (2 R^2) |x - x_start|^2 with
/// eps_c = eps / 2. The regularized optimum stays within R of x_start and
/// its optimal value is not below f*, so delta_f and R carry over.
inline ProblemInfo build_convex_regularization(const ProblemInfo& in, double eps) {
  require(eps > 0, "eps must be positive");
  require(in.R > 0, "R must be positive");
  ProblemInfo reg = in;
  reg.name = in.name + "/reg";
  const double mu = eps / (in.R * in.R);
  reg.convexity = ConvexityClass::StronglyConvex;
  reg.mu_f = mu;
  reg.M_f = in.M_f + mu;
  reg.G_f = in.G_f + mu * 2.0 * in.R;
  return reg;
}

inline ScsaResult convex_solve(const ProblemInfo& in, FirstOrderOracle& oracle, const ScsaConfig& cfg, double eps,
                               Rng& rng) {
  const ProblemInfo reg = build_convex_regularization(in, eps);
  const double mu = reg.mu_f;
  ProximalOracle regularized(oracle, in.x_start, mu, 0.0);
  ScsaConfig sc = cfg;
  sc.eps_c = eps / 2.0;
  ScsaResult res = scsa_solve(reg, regularized, sc, rng);
  res.trace.algorithm = "convex";
  res.trace.problem = in.name;
  return res;
}

}  // namespace safepd
