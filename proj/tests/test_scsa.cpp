#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "safepd/kkt.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"
#include "safepd/scsa.hpp"

using namespace safepd;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

ScsaResult run_quadratic(double sigma, std::int64_t budget, std::uint64_t seed, QueryLedger* ledger = nullptr,
                         double target = 5.0) {
  const ProblemSpec q = make_quadratic_benchmark(2, target);
  SimulatedOracle o(q, {sigma, sigma});
  Rng rng(seed);
  ScsaConfig cfg;
  cfg.max_oracle_calls = budget;
  ScsaResult r = scsa_solve(q.info, o, cfg, rng);
  if (ledger) *ledger = o.ledger();
  return r;
}

}  // namespace

TEST(ScsaSchedule, InitialDual) {
  EXPECT_EQ(initial_dual(18.0, 4.0), 4.5);
  EXPECT_THROW(initial_dual(18.0, 0.0), InputError);
}

TEST(ScsaSchedule, DualStep) {
  // g at the Lagrangian minimizer (0, 14/19) for lambda = 4.5 is (9/19)^2 - 4.
  const double g = 81.0 / 361.0 - 4.0;
  EXPECT_NEAR(dual_step(4.5, g, 2.0, 8.0), 4.5 + g / 256.0, 1e-15);
  EXPECT_NEAR(dual_step(4.5, g, 2.0, 8.0), 4.48525, 1e-5);
  EXPECT_EQ(dual_step(0.001, -4.0, 2.0, 8.0), 0.0);
  EXPECT_THROW(dual_step(1.0, 0.1, 2.0, 8.0), SafetyViolation);
}

TEST(ScsaSchedule, SafetyRadius) {
  EXPECT_EQ(safety_radius(-4.0, 8.0), 0.25);
  EXPECT_THROW(safety_radius(0.0, 8.0), SafetyViolation);
  EXPECT_THROW(safety_radius(0.5, 8.0), SafetyViolation);
}

TEST(ScsaSchedule, EtaRunningAndTerminal) {
  const ProblemInfo in = make_quadratic_benchmark(2).info;
  ScsaConfig cfg;
  EXPECT_EQ(eta_schedule(-4.0, 4.0, cfg, in), 1.0 / 256.0);
  // Terminal at lambda_next = 0.875: M_L = 9, eta = min(2 * 0.05^2 / 81, 0.05).
  EXPECT_NEAR(eta_schedule(-0.01, 0.875, cfg, in), 2.0 * 0.0025 / 81.0, 1e-18);
  EXPECT_NEAR(eta_schedule(-0.01, 0.875, cfg, in), 6.17e-5, 1e-7);
  EXPECT_TRUE(is_terminal_step(-0.01, 0.875, 0.05));
  EXPECT_FALSE(is_terminal_step(-4.0, 4.0, 0.05));
}

TEST(ScsaSchedule, EpsSchedule) {
  EXPECT_EQ(eps_schedule(-4.0, 0.01), 0.5);
  EXPECT_EQ(eps_schedule(-0.01, 0.01), 0.01);
  ScsaConfig cfg;
  EXPECT_NEAR(default_eps_floor(cfg, 4.5), 0.05 / 36.0, 1e-18);
}

TEST(ScsaHorizon, FirstPhaseAndTotal) {
  const ProblemInfo in = make_quadratic_benchmark(2).info;
  ScsaConfig cfg;
  EXPECT_EQ(horizon_bound(in, 4.5, cfg), 53092);
  const double mu_d = dual_curvature_bound(in, 4.5);
  const double coef = 16.0 * 64.0 / (mu_d * 2.0);
  const double scale = std::max(8.0 * 4.5, 4.0 * 64.0 * 4.5 * 4.5 / 2.0);
  EXPECT_EQ(horizon_bound(in, 4.5, cfg), static_cast<std::int64_t>(std::ceil(288.0 + coef * std::log(scale / 0.05))));
  // With the log term clipped at zero only 8 L_g^2 lc / (beta mu_f) = 8 * 64 * 4.5 / 8 remains.
  cfg.eps_c = 1e9;
  EXPECT_EQ(horizon_bound(in, 4.5, cfg), 288);
}

TEST(ScsaHorizon, LogAdditivity) {
  const ProblemInfo in = make_quadratic_benchmark(2).info;
  ScsaConfig a, b;
  a.eps_c = 0.05;
  b.eps_c = 0.025;
  const double coef = 16.0 * 64.0 / (dual_curvature_bound(in, 4.5) * 2.0);
  EXPECT_NEAR(static_cast<double>(horizon_bound(in, 4.5, b) - horizon_bound(in, 4.5, a)), coef * std::log(2.0), 1.0);
}

TEST(ScsaHorizon, NonIncreasingInBeta) {
  ProblemInfo in = make_quadratic_benchmark(2).info;
  ScsaConfig cfg;
  std::int64_t prev = horizon_bound(in, 4.5, cfg);
  for (double beta : {5.0, 8.0, 16.0, 64.0}) {
    in.beta = beta;
    const std::int64_t h = horizon_bound(in, 4.5, cfg);
    EXPECT_LE(h, prev);
    prev = h;
  }
}

TEST(ScsaRun, NoiselessQuadraticConverges) {
  QueryLedger ledger;
  const ScsaResult r = run_quadratic(0.0, 10'000'000, 1, &ledger);
  const ProblemSpec q = make_quadratic_benchmark(2);
  EXPECT_EQ(r.trace.outcome, Outcome::Converged);
  EXPECT_LE(q.objective(r.x).value - 12.25, 0.1);
  EXPECT_LE(q.constraint(r.x).value, 0.0);
  EXPECT_GE(r.lambda, 0.875 - 1e-3);
  EXPECT_LE(r.lambda, 4.5);
  EXPECT_LE(outer_iterations(r.trace), r.trace.horizon);
  EXPECT_EQ(r.trace.total_calls, ledger.total_samples());
  ASSERT_GE(r.trace.records.size(), 2u);
  EXPECT_NEAR(r.trace.records[1].lambda_next, 4.48525, 1e-5);
}

// Property: the dual iterates never fall below lambda* on the quadratic,
// never increase, and each ball stays inside the feasible set.
TEST(ScsaRun, NoiselessInvariants) {
  QueryLedger ledger;
  const ScsaResult r = run_quadratic(0.0, 10'000'000, 1, &ledger);
  const ProblemSpec q = make_quadratic_benchmark(2);
  double prev = 4.5;
  for (const DualState& s : r.trace.records) {
    if (s.phase == Phase::Preliminary) continue;
    EXPECT_GE(s.lambda_next, 0.875 - 1e-3);
    EXPECT_LE(s.lambda_next, prev);
    prev = s.lambda_next;
    EXPECT_LT(q.constraint(s.x).value + 2.0 * q.info.L_g * s.safety_radius, 1e-12);
    for (std::int64_t i = s.ledger_begin; i < s.ledger_end; ++i) {
      EXPECT_LE((ledger.records()[i].x - s.x).norm(), s.safety_radius * (1 + 1e-12));
    }
  }
  for (const LedgerRecord& rec : ledger.records()) EXPECT_LE(q.constraint(rec.x).value, 0.0);
}

// lambda* = 0 here; the run stops once the multiplier times the slack is
// below eps_c, so lambda_T <= eps_c / -g(x_T).
TEST(ScsaRun, InteriorOptimumDrivesMultiplierTowardZero) {
  const ScsaResult r = run_quadratic(0.0, 10'000'000, 2, nullptr, 0.6);
  EXPECT_EQ(r.trace.outcome, Outcome::Converged);
  const double g = make_quadratic_benchmark(2, 0.6).constraint(r.x).value;
  EXPECT_LE(r.lambda * -g, 0.05 + 1e-12);
  EXPECT_LT(r.lambda, 0.05);
  EXPECT_NEAR((r.x - v2(0.0, 0.6)).norm(), 0.0, 0.05);
}

TEST(ScsaRun, NoisyRunStaysFeasibleWithinBudget) {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    QueryLedger ledger;
    const ScsaResult r = run_quadratic(0.1, 200'000, seed, &ledger);
    EXPECT_TRUE(r.trace.outcome == Outcome::Converged || r.trace.outcome == Outcome::BudgetExceeded);
    EXPECT_LE(r.trace.total_calls, 200'000);
    const ProblemSpec q = make_quadratic_benchmark(2);
    for (const LedgerRecord& rec : ledger.records()) EXPECT_LE(q.constraint(rec.x).value, 0.0);
  }
}

TEST(ScsaRun, SameSeedSameTrace) {
  const ScsaResult a = run_quadratic(0.1, 50'000, 7);
  const ScsaResult b = run_quadratic(0.1, 50'000, 7);
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.lambda, b.lambda);
}

TEST(ScsaRun, TinyBudgetStopsCleanly) {
  const ScsaResult r = run_quadratic(0.1, 10, 8);
  EXPECT_EQ(r.trace.outcome, Outcome::BudgetExceeded);
  EXPECT_LE(r.trace.total_calls, 10);
}

TEST(ScsaRun, RejectsNonStronglyConvex) {
  const ProblemSpec p = make_nonconvex_benchmark(2, 0.5);
  SimulatedOracle o(p, {0.0, 0.0});
  Rng rng(9);
  EXPECT_THROW(scsa_solve(p.info, o, ScsaConfig{}, rng), InputError);
}

TEST(Kkt, Examples) {
  const ProblemSpec q = make_quadratic_benchmark(2);
  const KKTResidual at_opt = kkt_residual(q, v2(0.0, 1.5), 0.875);
  EXPECT_NEAR(at_opt.grad_norm, 0.0, 1e-14);
  EXPECT_NEAR(at_opt.comp_slack, 0.0, 1e-14);
  EXPECT_TRUE(at_opt.within(1e-9, 1e-9));
  const KKTResidual outside = kkt_residual(q, v2(0.0, 5.0), 0.0);
  EXPECT_EQ(outside.grad_norm, 0.0);
  EXPECT_FALSE(outside.feasible);
  EXPECT_FALSE(outside.within(1.0, 1.0));
  const KKTResidual start = kkt_residual(q, v2(0.0, 0.5), 1.0);
  EXPECT_EQ(start.grad_norm, 9.0);
  EXPECT_EQ(start.comp_slack, 4.0);
  EXPECT_EQ(kkt_residual(q, v2(0.0, 1.5), -1.0).lambda_nonneg, 1.0);
}
