#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/verify.hpp"

using namespace safepd;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

// Closed form for the quadratic benchmark: x_lambda = (0, (5 + 2 lambda) / (1 + 4 lambda)),
// g(x_lambda) = 81 / (1 + 4 lambda)^2 - 4.
double quad_dual(double lambda) {
  const double x1 = (5.0 + 2.0 * lambda) / (1.0 + 4.0 * lambda);
  const double f = (x1 - 5.0) * (x1 - 5.0);
  const double g = (2.0 * x1 - 1.0) * (2.0 * x1 - 1.0) - 4.0;
  return f + lambda * g;
}

RunTrace one_step_trace(std::int64_t total_calls) {
  RunTrace t;
  t.algorithm = "scsa";
  t.problem = "quadratic";
  t.dim = 2;
  DualState s;
  s.round = 0;
  s.t = 1;
  s.phase = Phase::Outer;
  s.x = v2(0.0, 0.5);
  s.lambda = 4.5;
  s.lambda_next = 4.4;
  s.g_hat = -3.9;
  s.safety_radius = 0.25;
  s.ledger_begin = 0;
  s.ledger_end = 1;
  s.x_next = v2(0.0, 0.6);
  t.records.push_back(s);
  t.total_calls = total_calls;
  return t;
}

}  // namespace

TEST(DualValue, MatchesClosedForm) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  EXPECT_NEAR(dual_value(q, 0.0).d, 0.0, 1e-8);
  EXPECT_NEAR(dual_value(q, 0.875).d, 12.25, 1e-8);
  EXPECT_NEAR(dual_value(q, 4.5).d, 427.5 / 361.0, 1e-8);
  for (double l : {0.1, 0.5, 1.0, 2.0, 3.3}) EXPECT_NEAR(dual_value(q, l).d, quad_dual(l), 1e-8) << l;
  EXPECT_NEAR(dual_value(q, 1.0).grad, 81.0 / 25.0 - 4.0, 1e-8);
}

TEST(DualValue, RejectsNegativeMultiplier) {
  EXPECT_THROW(dual_value(make_quadratic_benchmark(2), -1.0), InputError);
}

TEST(DualBisection, QuadraticMultiplier) {
  EXPECT_NEAR(dual_opt_bisection(make_quadratic_benchmark(2), 4.5), 0.875, 1e-6);
}

TEST(DualBisection, InteriorOptimumGivesZero) {
  EXPECT_EQ(dual_opt_bisection(make_quadratic_benchmark(2, 0.6), 10.0), 0.0);
}

TEST(DualBisection, RejectsLowBracket) {
  EXPECT_THROW(dual_opt_bisection(make_quadratic_benchmark(2), 0.5), InputError);
}

TEST(DualRegularity, CurvatureAtOptimum) {
  // d''(lambda) = -648 / (1 + 4 lambda)^3, which is -64/9 at lambda = 0.875.
  const ProblemSpec q = make_quadratic_benchmark(2);
  const RegularityReport r = check_dual_regularity(q, {0.875, 0.875 + 1e-3});
  EXPECT_NEAR(r.points[0].curvature, -64.0 / 9.0, 64.0 / 9.0 * 0.02);
}

TEST(DualRegularity, QuadraticPassesOnDenseGrid) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const RegularityReport r = check_dual_regularity(q, dual_grid(q, 64));
  EXPECT_TRUE(r.passed) << (r.failures.empty() ? "" : r.failures.front());
  EXPECT_EQ(r.points.size(), 64u);
  EXPECT_NEAR(r.lambda_star, 0.875, 1e-6);
  EXPECT_EQ(r.lambda_check, 4.5);
  EXPECT_LE(r.max_slope, 0.0);
  EXPECT_GE(r.min_slope, -r.smoothness_bound);
}

TEST(DualRegularity, GridIsValidated) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  EXPECT_THROW(check_dual_regularity(q, {0.1, 1.0}), InputError);
  EXPECT_THROW(check_dual_regularity(q, {2.0, 1.0}), InputError);
  EXPECT_THROW(dual_grid(q, 1), InputError);
}

TEST(GradientCheckTest, BenchmarksPass) {
  Rng rng(1);
  const ProblemSpec q = make_quadratic_benchmark(3);
  const GradientCheck c = check_gradients(q, sample_feasible_points(q, 50, 2.0, rng));
  EXPECT_TRUE(c.passed(1e-6));
}

TEST(GradientCheckTest, DetectsWrongGradient) {
  ProblemSpec q = make_quadratic_benchmark(2);
  auto f = q.objective;
  q.objective = [f](const Vector& x) {
    EvalPair e = f(x);
    e.gradient *= 1.1;
    return e;
  };
  Rng rng(2);
  const GradientCheck c = check_gradients(q, sample_feasible_points(q, 20, 2.0, rng));
  EXPECT_FALSE(c.passed(1e-3));
  EXPECT_LE(c.max_error_g, 1e-6);
}

TEST(Audit, CountsViolationsAndBallBreaches) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  QueryLedger ledger;
  ledger.append(v2(0.0, 5.0), 1);
  const AuditReport a = audit_trace(one_step_trace(1), ledger, q);
  EXPECT_EQ(a.violations, 1);
  EXPECT_EQ(a.worst_g, 77.0);
  EXPECT_EQ(a.safety_ball_breaches, 1);
  EXPECT_TRUE(a.lambda_monotone);
  EXPECT_EQ(a.ucb_checks, 1);
  EXPECT_EQ(a.ucb_misses, 0);
}

TEST(Audit, CleanTrace) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  QueryLedger ledger;
  ledger.append(v2(0.0, 0.6), 3);
  const AuditReport a = audit_trace(one_step_trace(3), ledger, q);
  EXPECT_EQ(a.violations, 0);
  EXPECT_EQ(a.safety_ball_breaches, 0);
  EXPECT_NEAR(a.worst_g, 0.04 - 4.0, 1e-12);
}

TEST(Audit, EmptyLedger) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  RunTrace t;
  const AuditReport a = audit_trace(t, QueryLedger{}, q);
  EXPECT_EQ(a.violations, 0);
  EXPECT_EQ(a.total_queries, 0);
  EXPECT_TRUE(a.to_json()["worst_g"].is_null());
}

TEST(Audit, MismatchedRunIsRejected) {
  QueryLedger ledger;
  ledger.append(v2(0.0, 0.6), 1);
  EXPECT_THROW(audit_trace(one_step_trace(2), ledger, make_quadratic_benchmark(2)), InputError);
}

TEST(Audit, DetectsIncreasingMultiplier) {
  RunTrace t = one_step_trace(1);
  t.records[0].lambda_next = 5.0;
  QueryLedger ledger;
  ledger.append(v2(0.0, 0.6), 1);
  EXPECT_FALSE(audit_trace(t, ledger, make_quadratic_benchmark(2)).lambda_monotone);
}

TEST(Audit, DetectsUcbMiss) {
  RunTrace t = one_step_trace(1);
  t.records[0].g_hat = -4.5;
  QueryLedger ledger;
  ledger.append(v2(0.0, 0.6), 1);
  EXPECT_EQ(audit_trace(t, ledger, make_quadratic_benchmark(2)).ucb_misses, 1);
}
