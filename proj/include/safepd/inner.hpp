#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "safepd/core.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"

namespace safepd {

/// Closed Euclidean ball.
struct Ball {
  Vector center;
  double radius = 0.0;

  bool contains(const Vector& x, double slack = 0.0) const {
    return (x - center).norm() <= radius * (1.0 + 1e-12) + slack;
  }
};

inline Vector project_ball(const Vector& x, const Ball& ball) {
  const Vector d = x - ball.center;
  const double n = d.norm();
  if (n <= ball.radius) return x;
  return ball.center + d * (ball.radius / n);
}

enum class InnerTermination {
  GradientCriterion,  ///< an optimality certificate was met
  IterationCount,     ///< the a-priori step count for the target was completed
  Budget,             ///< the oracle budget ran out first
};

inline const char* to_string(InnerTermination t) {
  switch (t) {
    case InnerTermination::GradientCriterion: return "gradient-criterion";
    case InnerTermination::IterationCount: return "iteration-count";
    case InnerTermination::Budget: return "budget";
  }
  return "unknown";
}

struct InnerReport {
  Vector x_out;
  std::int64_t oracle_calls = 0;
  std::int64_t iterations = 0;
  double target_eta = 0.0;
  InnerTermination terminated_by = InnerTermination::GradientCriterion;
  /// Ledger slice [ledger_begin, ledger_end) produced by this solve.
  std::int64_t ledger_begin = 0;
  std::int64_t ledger_end = 0;
};

/// Curvature and gradient constants of f + lambda g.
struct LagrangianConstants {
  double mu_f = 0.0;
  double mu_g = 0.0;
  double M_f = 0.0;
  double M_g = 0.0;
  double G_f = 0.0;
  double G_g = 0.0;

  double mu(double lambda) const { return mu_f + lambda * mu_g; }
  double M(double lambda) const { return M_f + lambda * M_g; }
  double G(double lambda) const { return G_f + lambda * G_g; }

  static LagrangianConstants from(const ProblemInfo& in) {
    return {in.mu_f, in.mu_g, in.M_f, in.M_g, in.G_f, in.G_g};
  }
};

struct PsgdOptions {
  std::int64_t max_calls = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_iterations = 10'000'000;
  /// Tighter bound on |grad L| over the ball, when the caller has one.
  std::optional<double> grad_norm_bound;
};

namespace detail {

inline std::int64_t used_since(const ValueOracle& o, std::int64_t start) { return o.calls() - start; }

}  // namespace detail

/// Projected (stochastic) gradient descent on L(., lambda) over a ball.
///
/// Noiseless oracle: steps of 1/M_L until the gap bound
///   min(|grad|^2 / 2mu, |G|^2 / 2mu + <grad, x - x+>),  G = M_L (x - x+),
/// is at most eta. Returns the certified point itself.
/// Noisy oracle: N = ceil(2 Ghat^2 / (mu_L eta)) steps of 2 / (mu_L (tau + 2))
/// with iterate weights tau + 1; returns the weighted average.
inline InnerReport psgd_solve(FirstOrderOracle& oracle, double lambda, const Ball& ball, const Vector& x_init,
                              double eta, const LagrangianConstants& c, Rng& rng, const PsgdOptions& opt = {}) {
  require(eta > 0, "psgd target eta must be positive");
  require(lambda >= 0, "psgd multiplier must be non-negative");
  require(ball.radius >= 0, "ball radius must be non-negative");
  require_dim(x_init, oracle.dim(), "psgd start");
  require(ball.contains(x_init, 1e-12), "psgd start must lie in the ball");
  const double mu = c.mu(lambda);
  const double M = c.M(lambda);
  require(mu > 0, "psgd needs a strongly convex Lagrangian");

  InnerReport rep;
  rep.target_eta = eta;
  rep.ledger_begin = oracle.ledger().size();
  const std::int64_t start = oracle.calls();
  auto finish = [&](Vector x, InnerTermination how) {
    rep.x_out = std::move(x);
    rep.terminated_by = how;
    rep.oracle_calls = detail::used_since(oracle, start);
    rep.ledger_end = oracle.ledger().size();
    return rep;
  };

  const std::int64_t cost = oracle.sample_cost();
  Vector x = project_ball(x_init, ball);
  if (oracle.grad_sigma() == 0.0) {
    for (std::int64_t it = 0; it < opt.max_iterations; ++it) {
      if (detail::used_since(oracle, start) + cost > opt.max_calls) return finish(x, InnerTermination::Budget);
      const OracleSample s = oracle.query(x, rng);
      const Vector grad = s.f_grad + lambda * s.g_grad;
      const Vector xp = project_ball(x - grad / M, ball);
      const Vector step = x - xp;
      const double gap_free = grad.squaredNorm() / (2.0 * mu);
      const double gap_map = M * M * step.squaredNorm() / (2.0 * mu) + grad.dot(step);
      if (std::min(gap_free, gap_map) <= eta) return finish(x, InnerTermination::GradientCriterion);
      x = xp;
      ++rep.iterations;
    }
    return finish(x, InnerTermination::IterationCount);
  }

  double G = c.G(lambda);
  if (opt.grad_norm_bound) G = std::min(G, *opt.grad_norm_bound);
  const double G_hat = G + (1.0 + lambda) * oracle.grad_sigma();
  const double n_steps = std::ceil(2.0 * G_hat * G_hat / (mu * eta));
  const auto N = static_cast<std::int64_t>(std::clamp(n_steps, 1.0, static_cast<double>(opt.max_iterations)));

  Vector avg = Vector::Zero(x.size());
  double weight = 0.0;
  for (std::int64_t tau = 0; tau < N; ++tau) {
    if (detail::used_since(oracle, start) + cost > opt.max_calls) {
      return finish(weight > 0 ? Vector(avg / weight) : x, InnerTermination::Budget);
    }
    const OracleSample s = oracle.query(x, rng);
    const Vector grad = s.f_grad + lambda * s.g_grad;
    x = project_ball(x - (2.0 / (mu * (tau + 2.0))) * grad, ball);
    avg += (tau + 1.0) * x;
    weight += tau + 1.0;
    ++rep.iterations;
  }
  return finish(Vector(avg / weight), InnerTermination::IterationCount);
}

struct DescentOptions {
  std::int64_t max_calls = std::numeric_limits<std::int64_t>::max();
  /// Horizon and confidence used in the log factors of the batch tests.
  std::int64_t T_max = 1;
  double delta = 0.01;
  std::int64_t initial_batch = 1;
  std::int64_t max_steps = 10'000'000;
};

/// Unconstrained minibatch gradient descent on L(., lambda) with step 1/M_L,
/// run until the estimated gradient satisfies |grad L| <= sqrt(mu_L eta).
/// Under noise the batch doubles while the confidence radius r of the
/// gradient estimate exceeds |grad| / 2, or when a step fails a
/// value-decrease test. Never leaves the sub-level set of L(x0, lambda)
/// except with small probability.
inline InnerReport descent_msgd(FirstOrderOracle& oracle, double lambda, const Vector& x0, double eta,
                                const LagrangianConstants& c, Rng& rng, const DescentOptions& opt = {}) {
  require(eta > 0, "descent target eta must be positive");
  require(lambda >= 0, "descent multiplier must be non-negative");
  require_dim(x0, oracle.dim(), "descent start");
  const double mu = c.mu(lambda);
  const double M = c.M(lambda);
  require(mu > 0, "descent needs a strongly convex Lagrangian");
  require(opt.T_max >= 1 && opt.delta > 0 && opt.delta < 1, "descent confidence parameters out of range");

  InnerReport rep;
  rep.target_eta = eta;
  rep.ledger_begin = oracle.ledger().size();
  const std::int64_t start = oracle.calls();
  auto finish = [&](Vector x, InnerTermination how) {
    rep.x_out = std::move(x);
    rep.terminated_by = how;
    rep.oracle_calls = detail::used_since(oracle, start);
    rep.ledger_end = oracle.ledger().size();
    return rep;
  };

  const double target = std::sqrt(mu * eta);
  const std::int64_t cost = oracle.sample_cost();
  Vector x = x0;

  if (oracle.grad_sigma() == 0.0 && oracle.value_sigma() == 0.0) {
    for (std::int64_t it = 0; it < opt.max_steps; ++it) {
      if (detail::used_since(oracle, start) + cost > opt.max_calls) return finish(x, InnerTermination::Budget);
      const OracleSample s = oracle.query(x, rng);
      const Vector grad = s.f_grad + lambda * s.g_grad;
      if (grad.norm() <= target) return finish(x, InnerTermination::GradientCriterion);
      x -= grad / M;
      ++rep.iterations;
    }
    return finish(x, InnerTermination::IterationCount);
  }

  const double log_term = std::log(static_cast<double>(opt.T_max) / opt.delta);
  const double scale = std::sqrt(1.0 + lambda * lambda);
  const double s_grad = oracle.grad_sigma() * scale;
  const double s_value = oracle.value_sigma() * scale;
  std::int64_t n = std::max<std::int64_t>(1, opt.initial_batch);

  for (std::int64_t it = 0; it < opt.max_steps; ++it) {
    if (detail::used_since(oracle, start) + cost * n > opt.max_calls) return finish(x, InnerTermination::Budget);
    const OracleSample s = oracle.sample(x, n, rng);
    const Vector grad = s.f_grad + lambda * s.g_grad;
    const double gnorm = grad.norm();
    const double radius = s_grad / std::sqrt(static_cast<double>(n)) * (1.0 + std::sqrt(2.0 * log_term));
    if (gnorm <= target) return finish(x, InnerTermination::GradientCriterion);
    if (radius > gnorm / 2.0) {
      n *= 2;
      continue;
    }
    const Vector x_new = x - grad / M;
    if (s_value > 0.0) {
      if (detail::used_since(oracle, start) + 2 * n > opt.max_calls) return finish(x, InnerTermination::Budget);
      const ValueSample here = oracle.sample_values(x, n, rng);
      const ValueSample there = oracle.sample_values(x_new, n, rng);
      const double rise = (there.f_value + lambda * there.g_value) - (here.f_value + lambda * here.g_value);
      if (rise > 2.0 * s_value * std::sqrt(log_term / static_cast<double>(n))) {
        n *= 2;
        continue;
      }
    }
    x = x_new;
    ++rep.iterations;
  }
  return finish(x, InnerTermination::IterationCount);
}

}  // namespace safepd
