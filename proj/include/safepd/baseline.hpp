#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "safepd/core.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/scsa.hpp"
#include "safepd/trace.hpp"

namespace safepd {

/// Simplified log-barrier SGD. Not a faithful reproduction of any published
/// barrier method; the name says so in every output.
inline constexpr const char* kLbsgdName = "lbsgd-simplified";

struct LbsgdConfig {
  double barrier_eta = 0.05;
  double fixed_step = 0.05;
  double delta = 0.01;
  std::int64_t max_oracle_calls = 1'000'000;
  /// Horizon used in the UCB log factor.
  std::int64_t T_max = 100'000;
  /// Stop once -g_hat falls below this margin.
  double boundary_floor = 1e-9;
  std::int64_t grad_batch = 1;
  /// Lower bound on the UCB accuracy.
  double ucb_eps_floor = 1e-3;

  void validate() const {
    require(barrier_eta > 0, "barrier_eta must be positive");
    require(fixed_step > 0, "fixed_step must be positive");
    require(delta > 0 && delta < 1, "delta must lie in (0, 1)");
    require(max_oracle_calls > 0 && T_max >= 1 && grad_batch >= 1, "lbsgd budgets must be positive");
    require(boundary_floor > 0 && ucb_eps_floor > 0, "boundary_floor and ucb_eps_floor must be positive");
  }
};

/// Gradient of f - eta ln(-g) from estimates.
inline Vector barrier_gradient(const Vector& f_grad, const Vector& g_grad, double g_value, double barrier_eta) {
  return f_grad + (barrier_eta / -g_value) * g_grad;
}

/// SGD on f - eta ln(-g) with step min(fixed, -g_hat / (2 L_g |grad B|)), so
/// no step leaves the certified ball around the current point.
inline ScsaResult lbsgd_baseline(const ProblemInfo& in, FirstOrderOracle& oracle, const LbsgdConfig& cfg, Rng& rng) {
  cfg.validate();
  require_dim(in.x_start, oracle.dim(), "x_start");
  ScsaResult res;
  RunTrace& trace = res.trace;
  trace.algorithm = kLbsgdName;
  trace.problem = in.name;
  trace.dim = in.dim;
  trace.horizon = cfg.T_max;

  Vector x = in.x_start;
  double g_prev = -in.alpha;
  double lambda = 0.0;
  const double eps_floor = cfg.ucb_eps_floor;
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

  for (std::int64_t t = 1;; ++t) {
    const double eps_t = eps_schedule(g_prev, eps_floor);
    const std::int64_t n = ucb_sample_size(oracle.value_sigma(), eps_t, cfg.T_max, cfg.delta);
    if (oracle.calls() + n + cfg.grad_batch * oracle.sample_cost() > cfg.max_oracle_calls) {
      return finish(Outcome::BudgetExceeded, "oracle budget exhausted");
    }
    const UcbEstimate ucb = estimate_constraint_ucb(oracle, x, eps_t, cfg.T_max, cfg.delta, rng);
    if (!(ucb.g_hat < -cfg.boundary_floor)) {
      return finish(Outcome::BoundaryFloor, "constraint margin " + std::to_string(-ucb.g_hat) + " below floor");
    }
    const std::int64_t ledger_begin = oracle.ledger().size();
    const std::int64_t calls_before = oracle.calls();
    const OracleSample s = oracle.sample(x, cfg.grad_batch, rng);
    const Vector grad = barrier_gradient(s.f_grad, s.g_grad, ucb.g_hat, cfg.barrier_eta);
    const double radius = safety_radius(ucb.g_hat, in.L_g);
    const double gn = grad.norm();
    const double step = gn > 0 ? std::min(cfg.fixed_step, radius / gn) : 0.0;

    DualState d;
    d.t = t;
    d.phase = Phase::Barrier;
    d.x = x;
    lambda = cfg.barrier_eta / -ucb.g_hat;
    d.lambda = lambda;
    d.lambda_next = lambda;
    d.g_hat = ucb.g_hat;
    d.eps = eps_t;
    d.safety_radius = radius;
    d.eta = step;
    d.ucb_samples = ucb.n_used;
    d.inner_calls = oracle.calls() - calls_before;
    d.inner_iterations = 1;
    d.ledger_begin = ledger_begin;
    d.ledger_end = oracle.ledger().size();
    x = x - step * grad;
    d.x_next = x;
    d.cumulative_calls = oracle.calls();
    trace.records.push_back(d);
    g_prev = ucb.g_hat;
  }
}

}  // namespace safepd
