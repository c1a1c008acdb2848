#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "safepd/baseline.hpp"
#include "safepd/io.hpp"
#include "safepd/kkt.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/safepd.hpp"
#include "safepd/scsa.hpp"
#include "safepd/smoothing.hpp"
#include "safepd/trace.hpp"

namespace safepd {

/// Analytic problem named by a config. "slab" is the smoothed two-constraint
/// toy; its parameter is the smoothing radius.
inline ProblemSpec problem_for(const RunConfig& c) {
  if (c.problem == "slab") return make_slab_problem(std::isnan(c.problem_param) ? 0.05 : c.problem_param).spec;
  const double param = std::isnan(c.problem_param) ? default_benchmark_param(c.problem) : c.problem_param;
  return make_benchmark(c.problem, c.dim, param);
}

struct RunOutput {
  RunTrace trace;
  QueryLedger ledger;
  ProblemSpec spec;
  double f_final = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> final_gap;
};

namespace detail {

inline ScsaResult dispatch(const std::string& algorithm, const RunConfig& c, const ProblemInfo& in,
                           FirstOrderOracle& oracle, Rng& rng) {
  ScsaConfig sc;
  sc.eps_p = c.eps_p;
  sc.eps_c = c.eps_c;
  sc.delta = c.delta;
  sc.max_oracle_calls = c.max_oracle_calls;
  if (algorithm == "scsa") return scsa_solve(in, oracle, sc, rng);
  if (algorithm == "convex") return convex_solve(in, oracle, sc, c.eps, rng);
  if (algorithm == "safepd") {
    SafePdConfig pc;
    pc.scsa = sc;
    pc.rho_f = c.rho_f;
    pc.rho_g = c.rho_g;
    pc.max_rounds = c.max_rounds;
    return safepd_solve(in, oracle, pc, rng);
  }
  if (algorithm == "lbsgd") {
    LbsgdConfig lc;
    lc.barrier_eta = c.barrier_eta;
    lc.fixed_step = c.lbsgd_step;
    lc.delta = c.delta;
    lc.max_oracle_calls = c.max_oracle_calls;
    return lbsgd_baseline(in, oracle, lc, rng);
  }
  throw InputError("unknown algorithm '" + algorithm + "'");
}

}  // namespace detail

/// One solve: builds the oracle stack, runs the algorithm, and attaches the
/// ground-truth KKT residual of the returned pair.
inline RunOutput execute_run(const RunConfig& c, const std::string& algorithm, std::uint64_t seed) {
  c.validate();
  RunOutput out;
  out.spec = problem_for(c);
  Rng rng(seed);
  const NoiseModel noise{c.sigma, c.sigma_hat};
  ScsaResult res;
  double perturbation = 0.0;

  if (c.problem == "slab") {
    require(c.feedback == "first_order", "the slab problem supports first-order feedback only");
    const MultiConstraintProblem mp = make_slab_problem(std::isnan(c.problem_param) ? 0.05 : c.problem_param);
    SmoothedConstraintOracle oracle(mp.spec.objective,
                                    randomized_smoothing(max_reduce(mp.components), 2, mp.nu, c.smoothing_n_mc),
                                    mp.spec.info.L_g, noise);
    res = detail::dispatch(algorithm, c, out.spec.info, oracle, rng);
    out.ledger = oracle.ledger();
  } else {
    SimulatedOracle base(out.spec, noise);
    if (c.feedback == "zeroth_order") {
      FiniteDifferenceOracle fd(base, c.fd_h);
      res = detail::dispatch(algorithm, c, out.spec.info, fd, rng);
      perturbation = c.fd_h;
    } else {
      res = detail::dispatch(algorithm, c, out.spec.info, base, rng);
    }
    out.ledger = base.ledger();
  }

  out.trace = std::move(res.trace);
  out.trace.seed = seed;
  out.trace.query_perturbation = perturbation;
  out.trace.final_kkt = kkt_residual(out.spec, out.trace.x_final, out.trace.lambda_final);
  out.f_final = out.spec.objective(out.trace.x_final).value;
  if (out.spec.truth.f_star) out.final_gap = out.f_final - *out.spec.truth.f_star;
  return out;
}

/// Best objective gap among feasible iterates available after each call
/// budget (f itself when f* is unknown). NaN before the first feasible point.
inline std::vector<double> best_gap_curve(const RunTrace& trace, const ProblemSpec& spec,
                                          const std::vector<std::int64_t>& budgets) {
  struct Point {
    std::int64_t calls;
    double value;
  };
  const double f_star = spec.truth.f_star.value_or(0.0);
  std::vector<Point> pts;
  auto add = [&](std::int64_t calls, const Vector& x) {
    if (x.size() != spec.info.dim) return;
    const TrueEval e = eval_true(spec, x);
    if (e.g.value <= 0) pts.push_back({calls, e.f.value - f_star});
  };
  add(0, spec.info.x_start);
  for (const DualState& s : trace.records) add(s.cumulative_calls, s.x_next);
  add(trace.total_calls, trace.x_final);

  std::vector<double> curve;
  curve.reserve(budgets.size());
  for (std::int64_t b : budgets) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const Point& p : pts) {
      if (p.calls <= b && !(p.value >= best)) best = p.value;
    }
    curve.push_back(best);
  }
  return curve;
}

inline nlohmann::json run_metadata(const RunConfig& c, const RunOutput& out) {
  nlohmann::json extra;
  extra["config"] = config_to_json(c);
  extra["f_final"] = detail::num(out.f_final);
  extra["final_gap"] = out.final_gap ? detail::num(*out.final_gap) : nlohmann::json(nullptr);
  if (out.trace.algorithm == kLbsgdName) extra["note"] = "simplified log-barrier baseline";
  return extra;
}

}  // namespace safepd
