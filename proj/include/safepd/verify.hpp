#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "safepd/core.hpp"
#include "safepd/inner.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/scsa.hpp"
#include "safepd/trace.hpp"

namespace safepd {

struct DualValue {
  double d = 0.0;
  Vector x_lambda;
  double grad = 0.0;  ///< g(x_lambda), the dual gradient
};

/// d(lambda) = min_x f + lambda g by deterministic gradient descent on the
/// analytic maps, stopped once |grad L| <= sqrt(2 mu_L tol).
inline DualValue dual_value(const ProblemSpec& spec, double lambda, double tol = 1e-22) {
  require(lambda >= 0, "dual_value needs lambda >= 0");
  require(tol > 0, "dual_value tolerance must be positive");
  const ProblemInfo& in = spec.info;
  const double mu = in.mu_f + lambda * in.mu_g;
  require(mu > 0, "Lagrangian is not strongly convex at this lambda (non-coercive)");
  const double M = in.M_f + lambda * in.M_g;
  const double target = std::sqrt(2.0 * mu * tol);
  Vector x = in.x_start;
  constexpr int kMaxIter = 5'000'000;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < kMaxIter; ++it) {
    const TrueEval e = eval_true(spec, x);
    const Vector grad = e.f.gradient + lambda * e.g.gradient;
    const double gn = grad.norm();
    // Below a few ulps the certificate is limited by rounding, not by the method.
    if (gn <= target || stalled > 200) return {e.f.value + lambda * e.g.value, x, e.g.value};
    if (gn < best * (1.0 - 1e-12)) {
      best = gn;
      stalled = 0;
    } else {
      ++stalled;
    }
    x -= grad / M;
  }
  throw InputError("dual_value did not converge");
}

/// lambda* by bisection on the sign of g(x_lambda) over [0, lambda_hi].
inline double dual_opt_bisection(const ProblemSpec& spec, double lambda_hi, double tol = 1e-9) {
  require(lambda_hi >= 0 && tol > 0, "bisection needs lambda_hi >= 0 and tol > 0");
  if (dual_value(spec, 0.0).grad <= 0) return 0.0;
  require(dual_value(spec, lambda_hi).grad <= 0,
          "bisection bracket failed: g(x_lambda_hi) > 0, so lambda_hi is below the dual bound delta_f / beta");
  double lo = 0.0, hi = lambda_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (dual_value(spec, mid).grad > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Lower bound on the local strong concavity of d, from MFCQ-type
/// constants: l^2 / (M_f + lambda M_g).
inline double dual_curvature_from_l(double l, const ProblemInfo& in, double lambda) {
  return l * l / (in.M_f + lambda * in.M_g);
}

struct RegularityPoint {
  double lambda = 0.0;
  double g = 0.0;           ///< dual gradient g(x_lambda)
  double grad_g_norm = 0.0; ///< |grad g(x_lambda)|
  double curvature = 0.0;   ///< d''(lambda) by central differences
  double curvature_bound = 0.0;
  double growth_lhs = 0.0;  ///< -g(x_lambda)
  double growth_rhs = 0.0;  ///< mu_d / 2 (lambda - lambda*)
};

struct RegularityReport {
  bool passed = true;
  double lambda_star = 0.0;
  double lambda_check = 0.0;
  double smoothness_bound = 0.0;  ///< 2 L_g^2 / mu_f
  double min_slope = 0.0;
  double max_slope = 0.0;
  std::vector<RegularityPoint> points;
  std::vector<std::string> failures;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["passed"] = passed;
    j["lambda_star"] = lambda_star;
    j["lambda_check"] = lambda_check;
    j["smoothness_bound"] = smoothness_bound;
    j["min_slope"] = min_slope;
    j["max_slope"] = max_slope;
    j["grid_points"] = points.size();
    j["failures"] = failures;
    return j;
  }
};

/// n evenly spaced points on [lambda*, lambda_check].
inline std::vector<double> dual_grid(const ProblemSpec& spec, int n) {
  require(n >= 2, "grid needs at least two points");
  const double lc = initial_dual(spec.info.delta_f, spec.info.alpha);
  const double ls = dual_opt_bisection(spec, lc, 1e-12);
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = ls + (lc - ls) * i / (n - 1.0);
  return grid;
}

/// Checks on a grid over [lambda*, lambda_check]:
///  - slopes of g(x_lambda) lie in [-2 L_g^2 / mu_f, 0];
///  - |d''(lambda)| >= |grad g(x_lambda)|^2 / (M_f + lambda M_g) up to slack;
///  - -g(x_lambda) >= mu_d / 2 (lambda - lambda*).
inline RegularityReport check_dual_regularity(const ProblemSpec& spec, const std::vector<double>& grid) {
  const ProblemInfo& in = spec.info;
  require(in.mu_f > 0, "dual regularity needs a strongly convex objective");
  require(grid.size() >= 2, "grid needs at least two points");
  RegularityReport rep;
  rep.lambda_check = initial_dual(in.delta_f, in.alpha);
  rep.lambda_star = dual_opt_bisection(spec, rep.lambda_check, 1e-12);
  rep.smoothness_bound = 2.0 * in.L_g * in.L_g / in.mu_f;
  constexpr double kEdge = 1e-9;
  for (double l : grid) {
    require(l >= rep.lambda_star - kEdge && l <= rep.lambda_check + kEdge,
            "grid point " + std::to_string(l) + " leaves [lambda*, lambda_check]");
  }
  require(std::is_sorted(grid.begin(), grid.end()), "grid must be sorted");

  constexpr double h = 1e-4;
  for (double l : grid) {
    RegularityPoint p;
    p.lambda = l;
    const DualValue dv = dual_value(spec, l);
    p.g = dv.grad;
    p.grad_g_norm = eval_true(spec, dv.x_lambda).g.gradient.norm();
    const double lo = std::max(0.0, l - h);
    p.curvature = (dual_value(spec, l + h).grad - dual_value(spec, lo).grad) / (l + h - lo);
    p.curvature_bound = p.grad_g_norm * p.grad_g_norm / (in.M_f + l * in.M_g);
    p.growth_lhs = -p.g;
    p.growth_rhs = 0.5 * dual_curvature_bound(in, l) * (l - rep.lambda_star);
    rep.points.push_back(p);
  }

  rep.min_slope = std::numeric_limits<double>::infinity();
  rep.max_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < rep.points.size(); ++i) {
    const double dl = rep.points[i + 1].lambda - rep.points[i].lambda;
    if (dl <= 0) continue;
    const double slope = (rep.points[i + 1].g - rep.points[i].g) / dl;
    rep.min_slope = std::min(rep.min_slope, slope);
    rep.max_slope = std::max(rep.max_slope, slope);
  }
  const double slope_slack = 1e-7 * rep.smoothness_bound;
  if (rep.max_slope > slope_slack) rep.failures.push_back("dual gradient increases on the grid");
  if (rep.min_slope < -rep.smoothness_bound - slope_slack) rep.failures.push_back("dual smoothness bound violated");
  for (const RegularityPoint& p : rep.points) {
    const double slack = 1e-5 * std::max(1.0, p.curvature_bound);
    if (std::abs(p.curvature) < p.curvature_bound - slack) {
      rep.failures.push_back("curvature below bound at lambda=" + std::to_string(p.lambda));
    }
    if (p.growth_lhs < p.growth_rhs - 1e-9) {
      rep.failures.push_back("quadratic growth fails at lambda=" + std::to_string(p.lambda));
    }
  }
  rep.passed = rep.failures.empty();
  return rep;
}

/// n points drawn uniformly from the feasible part of the ball of radius
/// `radius` around x_start, by rejection.
inline std::vector<Vector> sample_feasible_points(const ProblemSpec& spec, int n, double radius, Rng& rng) {
  require(n >= 0 && radius > 0, "sampling needs n >= 0 and radius > 0");
  const int d = spec.info.dim;
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> pts;
  std::int64_t tries = 0;
  while (static_cast<int>(pts.size()) < n) {
    require(++tries < 1'000'000LL + 1000LL * n, "feasible-point sampler found too few feasible points");
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = z(rng);
    const Vector x = spec.info.x_start + v.normalized() * radius * std::pow(u(rng), 1.0 / d);
    if (eval_true(spec, x).g.value <= 0) pts.push_back(x);
  }
  return pts;
}

struct GradientCheck {
  double max_error_f = 0.0;
  double max_error_g = 0.0;
  int points = 0;
  bool passed(double tol) const { return max_error_f <= tol && max_error_g <= tol; }
};

/// Central differences (step h) against the analytic gradients. Errors are
/// relative to max(|grad|, 1).
inline GradientCheck check_gradients(const ProblemSpec& spec, const std::vector<Vector>& points, double h = 1e-5) {
  GradientCheck out;
  const int d = spec.info.dim;
  for (const Vector& x : points) {
    const TrueEval e = eval_true(spec, x);
    Vector fd_f(d), fd_g(d);
    for (int i = 0; i < d; ++i) {
      Vector xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const TrueEval ep = eval_true(spec, xp), em = eval_true(spec, xm);
      fd_f(i) = (ep.f.value - em.f.value) / (2.0 * h);
      fd_g(i) = (ep.g.value - em.g.value) / (2.0 * h);
    }
    out.max_error_f = std::max(out.max_error_f, (fd_f - e.f.gradient).norm() / std::max(e.f.gradient.norm(), 1.0));
    out.max_error_g = std::max(out.max_error_g, (fd_g - e.g.gradient).norm() / std::max(e.g.gradient.norm(), 1.0));
    ++out.points;
  }
  return out;
}

struct AuditReport {
  std::int64_t total_queries = 0;
  std::int64_t total_samples = 0;
  std::int64_t violations = 0;
  double worst_g = -std::numeric_limits<double>::infinity();
  bool lambda_monotone = true;
  std::int64_t safety_ball_breaches = 0;
  std::int64_t ucb_checks = 0;
  std::int64_t ucb_misses = 0;  ///< iterations with g_hat < g(x_t)

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["total_queries"] = total_queries;
    j["total_samples"] = total_samples;
    j["violations"] = violations;
    j["worst_g"] = total_queries > 0 ? nlohmann::json(worst_g) : nlohmann::json(nullptr);
    j["lambda_monotone"] = lambda_monotone;
    j["safety_ball_breaches"] = safety_ball_breaches;
    j["ucb_checks"] = ucb_checks;
    j["ucb_misses"] = ucb_misses;
    return j;
  }
};

/// Evaluates the true constraint at every ledger point, checks dual
/// monotonicity within each round, and checks that every primal-solve query
/// of an outer iteration lies in that iteration's safety ball.
inline AuditReport audit_trace(const RunTrace& trace, const QueryLedger& ledger, const ProblemSpec& spec) {
  if (trace.total_calls != ledger.total_samples()) {
    throw InputError("trace and ledger come from different runs: " + std::to_string(trace.total_calls) +
                     " calls traced, " + std::to_string(ledger.total_samples()) + " in the ledger");
  }
  AuditReport rep;
  rep.total_queries = ledger.size();
  rep.total_samples = ledger.total_samples();
  for (const LedgerRecord& r : ledger.records()) {
    const double g = eval_true(spec, r.x).g.value;
    rep.worst_g = std::max(rep.worst_g, g);
    if (g > 0) ++rep.violations;
  }

  std::map<int, double> last_lambda;
  for (const DualState& s : trace.records) {
    if (s.phase != Phase::Outer && s.phase != Phase::Terminal) continue;
    auto it = last_lambda.find(s.round);
    if (s.lambda_next > s.lambda) rep.lambda_monotone = false;
    if (it != last_lambda.end() && s.lambda > it->second) rep.lambda_monotone = false;
    last_lambda[s.round] = s.lambda_next;

    ++rep.ucb_checks;
    if (s.g_hat < eval_true(spec, s.x).g.value) ++rep.ucb_misses;

    require(s.ledger_begin >= 0 && s.ledger_begin <= s.ledger_end && s.ledger_end <= ledger.size(),
            "trace references ledger records that do not exist");
    const Ball ball{s.x, s.safety_radius};
    for (std::int64_t q = s.ledger_begin; q < s.ledger_end; ++q) {
      if (!ball.contains(ledger.records()[q].x, 1e-12 + trace.query_perturbation)) ++rep.safety_ball_breaches;
    }
  }
  return rep;
}

}  // namespace safepd
