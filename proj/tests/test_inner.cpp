#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "safepd/inner.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"

using namespace safepd;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

// Minimizer of |x - (0, 5)|^2 + lambda (x_0^2 + (2 x_1 - 1)^2 - 4):
// x_0 = 0, 2 (x_1 - 5) + 4 lambda (2 x_1 - 1) = 0.
Vector quad_argmin(double lambda) { return v2(0.0, (5.0 + 2.0 * lambda) / (1.0 + 4.0 * lambda)); }

double lagrangian(const ProblemSpec& s, const Vector& x, double lambda) {
  return s.objective(x).value + lambda * s.constraint(x).value;
}

}  // namespace

TEST(ProjectBall, Examples) {
  const Ball b{v2(0, 0), 1.0};
  EXPECT_EQ(project_ball(v2(0.3, 0.4), b), v2(0.3, 0.4));
  EXPECT_NEAR((project_ball(v2(3.0, 4.0), b) - v2(0.6, 0.8)).norm(), 0.0, 1e-15);
  EXPECT_EQ(project_ball(v2(5.0, 0.0), Ball{v2(1, 1), 0.0}), v2(1, 1));
}

TEST(ProjectBall, IdempotentAndInside) {
  Rng rng(1);
  std::normal_distribution<double> z(0.0, 5.0);
  const Ball b{v2(1.0, -2.0), 0.7};
  for (int i = 0; i < 1000; ++i) {
    const Vector p = project_ball(v2(z(rng), z(rng)), b);
    EXPECT_TRUE(b.contains(p));
    EXPECT_NEAR((project_ball(p, b) - p).norm(), 0.0, 1e-15);
  }
}

TEST(LagrangianConstantsTest, LinearInLambda) {
  const LagrangianConstants c = LagrangianConstants::from(make_quadratic_benchmark(2).info);
  EXPECT_EQ(c.mu(0.875), 2.0 + 0.875 * 2.0);
  EXPECT_EQ(c.M(0.875), 2.0 + 0.875 * 8.0);
}

TEST(Psgd, NoiselessReachesConstrainedOptimum) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  SimulatedOracle o(q, {0.0, 0.0});
  Rng rng(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  const InnerReport r = psgd_solve(o, 0.875, Ball{v2(0, 0.5), 2.0}, v2(0, 0.5), 1e-12, c, rng);
  EXPECT_EQ(r.terminated_by, InnerTermination::GradientCriterion);
  EXPECT_NEAR((r.x_out - v2(0.0, 1.5)).norm(), 0.0, 1e-6);
}

TEST(Psgd, NoiselessGapWithinTarget) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  for (double lambda : {0.0, 0.5, 2.0}) {
    for (double eta : {1e-2, 1e-4, 1e-6}) {
      SimulatedOracle o(q, {0.0, 0.0});
      Rng rng(3);
      const Vector xs = quad_argmin(lambda);
      const Ball ball{v2(0.0, xs(1) + 0.3), 0.5};
      const InnerReport r = psgd_solve(o, lambda, ball, ball.center, eta, c, rng);
      const double gap = lagrangian(q, r.x_out, lambda) - lagrangian(q, xs, lambda);
      EXPECT_LE(gap, eta) << lambda << " " << eta;
      EXPECT_GE(gap, -1e-12);
      EXPECT_TRUE(ball.contains(r.x_out));
    }
  }
}

TEST(Psgd, BallMinimizerWhenUnconstrainedOptimumOutside) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  SimulatedOracle o(q, {0.0, 0.0});
  Rng rng(4);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  // x_0 = 0 on the segment x_1 in [0, 1]: the ball minimizer is the top point.
  const InnerReport r = psgd_solve(o, 0.0, Ball{v2(0, 0.5), 0.5}, v2(0, 0.5), 1e-10, c, rng);
  EXPECT_NEAR((r.x_out - v2(0.0, 1.0)).norm(), 0.0, 1e-5);
}

TEST(Psgd, StochasticMeanGapWithinTarget) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  const double lambda = 1.0;
  const Vector xs = quad_argmin(lambda);
  const Ball ball{v2(0.0, xs(1) + 0.05), 0.1};
  PsgdOptions opt;
  opt.grad_norm_bound = c.M(lambda) * 2.0 * ball.radius;
  for (double eta : {1e-2, 1e-4, 1e-6}) {
    double mean_gap = 0.0;
    constexpr int reps = 4;
    for (int k = 0; k < reps; ++k) {
      SimulatedOracle o(q, {0.1, 0.1});
      Rng rng(100 + k);
      const InnerReport r = psgd_solve(o, lambda, ball, ball.center, eta, c, rng, opt);
      EXPECT_EQ(r.terminated_by, InnerTermination::IterationCount);
      EXPECT_TRUE(ball.contains(r.x_out));
      mean_gap += (lagrangian(q, r.x_out, lambda) - lagrangian(q, xs, lambda)) / reps;
    }
    EXPECT_LE(mean_gap, eta) << eta;
  }
}

TEST(Psgd, StochasticStepCount) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  SimulatedOracle o(q, {0.1, 0.1});
  Rng rng(5);
  PsgdOptions opt;
  opt.grad_norm_bound = 1.0;
  // Ghat = 1 + (1 + 1) 0.1 = 1.2, mu = 4: N = ceil(2 * 1.44 / (4 * 1e-3)) = 720.
  const InnerReport r = psgd_solve(o, 1.0, Ball{v2(0, 1.3), 0.1}, v2(0, 1.3), 1e-3, c, rng, opt);
  EXPECT_EQ(r.iterations, 720);
  EXPECT_EQ(r.oracle_calls, 720);
  EXPECT_EQ(r.ledger_end - r.ledger_begin, 720);
}

TEST(Psgd, IteratesNeverLeaveBall) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  SimulatedOracle o(q, {1.0, 5.0});
  Rng rng(6);
  const Ball ball{v2(0.2, 0.4), 0.3};
  const InnerReport r = psgd_solve(o, 0.2, ball, ball.center, 1e-2, c, rng);
  for (std::int64_t i = r.ledger_begin; i < r.ledger_end; ++i) {
    EXPECT_TRUE(ball.contains(o.ledger().records()[i].x));
  }
}

TEST(Psgd, RespectsBudget) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  SimulatedOracle o(q, {0.1, 0.1});
  Rng rng(7);
  PsgdOptions opt;
  opt.max_calls = 50;
  const InnerReport r = psgd_solve(o, 1.0, Ball{v2(0, 1), 0.5}, v2(0, 1), 1e-6, c, rng, opt);
  EXPECT_EQ(r.terminated_by, InnerTermination::Budget);
  EXPECT_EQ(o.calls(), 50);
}

TEST(Psgd, RejectsBadInput) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  SimulatedOracle o(q, {0.0, 0.0});
  Rng rng(8);
  EXPECT_THROW(psgd_solve(o, 1.0, Ball{v2(0, 1), 0.5}, v2(0, 1), 0.0, c, rng), InputError);
  EXPECT_THROW(psgd_solve(o, -1.0, Ball{v2(0, 1), 0.5}, v2(0, 1), 1e-3, c, rng), InputError);
  EXPECT_THROW(psgd_solve(o, 1.0, Ball{v2(0, 1), 0.5}, v2(3, 1), 1e-3, c, rng), InputError);
}

TEST(Descent, NoiselessConvergesToLagrangianMinimizer) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  SimulatedOracle o(q, {0.0, 0.0});
  Rng rng(9);
  const InnerReport r =
      descent_msgd(o, 4.5, q.info.x_start, 1e-14, LagrangianConstants::from(q.info), rng);
  EXPECT_EQ(r.terminated_by, InnerTermination::GradientCriterion);
  EXPECT_NEAR((r.x_out - v2(0.0, 14.0 / 19.0)).norm(), 0.0, 1e-7);
}

TEST(Descent, NoiselessGapWithinTarget) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const double eta = 1.0 / 16.0;
  SimulatedOracle o(q, {0.0, 0.0});
  Rng rng(10);
  const InnerReport r = descent_msgd(o, 4.5, q.info.x_start, eta, LagrangianConstants::from(q.info), rng);
  EXPECT_LE(lagrangian(q, r.x_out, 4.5) - lagrangian(q, quad_argmin(4.5), 4.5), eta);
}

TEST(Descent, ZeroStepsAtOptimum) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  SimulatedOracle o(q, {0.0, 0.0});
  Rng rng(11);
  const InnerReport r = descent_msgd(o, 0.875, v2(0.0, 1.5), 1e-6, LagrangianConstants::from(q.info), rng);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.oracle_calls, 1);
  EXPECT_EQ(r.x_out, v2(0.0, 1.5));
}

TEST(Descent, NoiselessLagrangianIsMonotone) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  Vector x = v2(1.5, 0.2);
  double prev = lagrangian(q, x, 1.0);
  for (int k = 0; k < 20; ++k) {
    SimulatedOracle o(q, {0.0, 0.0});
    Rng rng(12);
    DescentOptions opt;
    opt.max_steps = 1;
    x = descent_msgd(o, 1.0, x, 1e-12, c, rng, opt).x_out;
    const double now = lagrangian(q, x, 1.0);
    EXPECT_LE(now, prev + 1e-15);
    prev = now;
  }
}

TEST(Descent, NoisyStaysSafeAndImproves) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const LagrangianConstants c = LagrangianConstants::from(q.info);
  const double eta = 1.0 / 16.0;
  for (int k = 0; k < 10; ++k) {
    SimulatedOracle o(q, {0.1, 0.1});
    Rng rng(200 + k);
    DescentOptions opt;
    opt.T_max = 1000;
    const InnerReport r = descent_msgd(o, 4.5, q.info.x_start, eta, c, rng, opt);
    EXPECT_EQ(r.terminated_by, InnerTermination::GradientCriterion);
    EXPECT_LE(lagrangian(q, r.x_out, 4.5), lagrangian(q, q.info.x_start, 4.5));
    EXPECT_LT(q.constraint(r.x_out).value, 0.0);
    for (std::int64_t i = r.ledger_begin; i < r.ledger_end; ++i) {
      EXPECT_LT(q.constraint(o.ledger().records()[i].x).value, 0.0);
    }
  }
}

TEST(Descent, RespectsBudget) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  SimulatedOracle o(q, {0.1, 0.1});
  Rng rng(13);
  DescentOptions opt;
  opt.max_calls = 100;
  const InnerReport r = descent_msgd(o, 4.5, q.info.x_start, 1e-9, LagrangianConstants::from(q.info), rng, opt);
  EXPECT_EQ(r.terminated_by, InnerTermination::Budget);
  EXPECT_LE(o.calls(), 100);
}
