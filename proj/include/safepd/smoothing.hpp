#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "safepd/core.hpp"
#include "safepd/oracle.hpp"
#include "safepd/problem.hpp"

namespace safepd {

/// Value-only constraint function.
using ConstraintMap = std::function<double(const Vector&)>;

/// Pointwise maximum of several constraints. Non-smooth in general.
inline ConstraintMap max_reduce(std::vector<ConstraintMap> constraints) {
  require(!constraints.empty(), "max_reduce needs at least one constraint");
  if (constraints.size() == 1) return std::move(constraints.front());
  return [cs = std::move(constraints)](const Vector& x) {
    double m = cs.front()(x);
    for (std::size_t i = 1; i < cs.size(); ++i) m = std::max(m, cs[i](x));
    return m;
  };
}

namespace detail {

inline Vector uniform_sphere(int dim, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vector v(dim);
  double n2 = 0.0;
  do {
    for (int i = 0; i < dim; ++i) v(i) = z(rng);
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v / std::sqrt(n2);
}

inline Vector uniform_ball(int dim, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double radius = std::pow(unif(rng), 1.0 / dim);
  return radius * uniform_sphere(dim, rng);
}

}  // namespace detail

/// Monte Carlo oracle for g_nu(x) = E[g(x + nu u)], u uniform on the unit
/// ball. Gradients use the symmetric two-point estimator
///   (d / 2nu) (g(x + nu v) - g(x - nu v)) v,  v uniform on the sphere,
/// which is unbiased for grad g_nu.
class RandomizedSmoothing {
 public:
  struct Estimate {
    double value = 0.0;
    Vector gradient;
  };

  RandomizedSmoothing(ConstraintMap g, int dim, double nu, std::int64_t n_mc)
      : g_(std::move(g)), dim_(dim), nu_(nu), n_mc_(n_mc) {
    require(dim > 0, "smoothing dimension must be positive");
    require(nu > 0 && std::isfinite(nu), "smoothing radius nu must be positive");
    require(n_mc >= 1, "smoothing needs at least one Monte Carlo sample");
  }

  int dim() const { return dim_; }
  double nu() const { return nu_; }
  std::int64_t n_mc() const { return n_mc_; }

  double value(const Vector& x, Rng& rng) const { return value(x, n_mc_, rng); }

  double value(const Vector& x, std::int64_t draws, Rng& rng) const {
    require_dim(x, dim_, "smoothed constraint");
    double sum = 0.0;
    for (std::int64_t j = 0; j < draws; ++j) sum += g_(x + nu_ * detail::uniform_ball(dim_, rng));
    return sum / static_cast<double>(draws);
  }

  Vector gradient(const Vector& x, Rng& rng) const { return gradient(x, n_mc_, rng); }

  Vector gradient(const Vector& x, std::int64_t draws, Rng& rng) const {
    require_dim(x, dim_, "smoothed constraint");
    Vector acc = Vector::Zero(dim_);
    for (std::int64_t j = 0; j < draws; ++j) {
      const Vector v = detail::uniform_sphere(dim_, rng);
      acc += (g_(x + nu_ * v) - g_(x - nu_ * v)) * v;
    }
    return acc * (dim_ / (2.0 * nu_ * static_cast<double>(draws)));
  }

  Estimate estimate(const Vector& x, Rng& rng) const { return {value(x, rng), gradient(x, rng)}; }

  /// Smoothness of g_nu when g is L-Lipschitz.
  double smoothness(double lipschitz) const { return lipschitz * dim_ / nu_; }

 private:
  ConstraintMap g_;
  int dim_;
  double nu_;
  std::int64_t n_mc_;
};

inline RandomizedSmoothing randomized_smoothing(ConstraintMap g, int dim, double nu, std::int64_t n_mc) {
  return RandomizedSmoothing(std::move(g), dim, nu, n_mc);
}

/// First-order oracle over an analytic objective and a smoothed constraint.
/// Each first-order sample spends n_mc evaluations of the raw constraint
/// around x. The ledger records the solver's query point x.
class SmoothedConstraintOracle final : public FirstOrderOracle {
 public:
  SmoothedConstraintOracle(AnalyticMap objective, RandomizedSmoothing smoothing, double lipschitz,
                           NoiseModel objective_noise = {})
      : objective_(std::move(objective)),
        smoothing_(std::move(smoothing)),
        lipschitz_(lipschitz),
        noise_(objective_noise) {
    require(lipschitz > 0, "smoothed constraint needs a positive Lipschitz constant");
  }

  int dim() const override { return smoothing_.dim(); }
  /// Every term g(x + nu u) lies within an interval of width 2 L nu, so a
  /// mean of n_mc of them is (L nu / sqrt(n_mc))-sub-Gaussian.
  double value_sigma() const override {
    const double mc = lipschitz_ * smoothing_.nu() / std::sqrt(static_cast<double>(smoothing_.n_mc()));
    return std::sqrt(noise_.sigma * noise_.sigma + mc * mc);
  }
  /// Each two-point term is bounded in norm by d L.
  double grad_sigma() const override {
    const double mc = lipschitz_ * dim() / std::sqrt(static_cast<double>(smoothing_.n_mc()));
    return std::sqrt(noise_.sigma_hat * noise_.sigma_hat + mc * mc);
  }
  const QueryLedger& ledger() const override { return ledger_; }
  const RandomizedSmoothing& smoothing() const { return smoothing_; }

  ValueSample sample_values(const Vector& x, std::int64_t n, Rng& rng) override {
    require(n >= 1, "oracle query needs at least one sample");
    ValueSample s;
    s.f_value = objective_(x).value + value_noise(n, rng);
    s.g_value = smoothing_.value(x, n * smoothing_.n_mc(), rng);
    s.query_index = ledger_.append(x, n);
    return s;
  }

  OracleSample sample(const Vector& x, std::int64_t n, Rng& rng) override {
    require(n >= 1, "oracle query needs at least one sample");
    const EvalPair f = objective_(x);
    OracleSample s;
    s.f_value = f.value + value_noise(n, rng);
    s.f_grad = f.gradient;
    if (noise_.sigma_hat > 0) {
      std::normal_distribution<double> z(0.0, noise_.sigma_hat / std::sqrt(static_cast<double>(n) * dim()));
      for (int i = 0; i < dim(); ++i) s.f_grad(i) += z(rng);
    }
    const std::int64_t draws = n * smoothing_.n_mc();
    s.g_value = smoothing_.value(x, draws, rng);
    s.g_grad = smoothing_.gradient(x, draws, rng);
    s.query_index = ledger_.append(x, n);
    return s;
  }

 private:
  double value_noise(std::int64_t n, Rng& rng) const {
    if (noise_.sigma == 0.0) return 0.0;
    std::normal_distribution<double> z(0.0, noise_.sigma / std::sqrt(static_cast<double>(n)));
    return z(rng);
  }

  AnalyticMap objective_;
  RandomizedSmoothing smoothing_;
  double lipschitz_;
  NoiseModel noise_;
  QueryLedger ledger_;
};

/// Problem with several constraints, solved through their smoothed maximum.
struct MultiConstraintProblem {
  ProblemSpec spec;  ///< constraint = max of the components (subgradient)
  std::vector<ConstraintMap> components;
  double nu = 0.0;
};

/// Toy slab: min |x - (2, 0)|^2  s.t.  x_0 - 1 <= 0,  -x_0 - 1 <= 0.
/// The constants describe the nu-smoothed maximum, which is what the
/// solver sees. Optimum (1, 0), f* = 1, multiplier 2.
inline MultiConstraintProblem make_slab_problem(double nu) {
  require(nu > 0 && nu < 0.5, "slab problem needs 0 < nu < 0.5");
  constexpr int d = 2;
  MultiConstraintProblem p;
  p.nu = nu;
  p.components.push_back([](const Vector& x) { return x(0) - 1.0; });
  p.components.push_back([](const Vector& x) { return -x(0) - 1.0; });

  ProblemInfo& in = p.spec.info;
  in.name = "slab";
  in.dim = d;
  in.convexity = ConvexityClass::StronglyConvex;
  in.x_start = Vector::Zero(d);
  in.mu_f = 2.0;
  in.M_f = 2.0;
  in.mu_g = 0.0;
  in.L_g = 1.0;
  in.G_g = 1.0;
  in.M_g = in.L_g * d / nu;
  // g_nu(0) = -1 + nu E|u_0| = -1 + nu * 4 / (3 pi) for u uniform on the disc.
  in.alpha = 1.0 - nu;
  in.beta = 1.0 - nu;
  // The feasible set is unbounded; what the safe initialization needs is
  // f(x_start) - inf f = 4.
  in.delta_f = 4.0;
  in.R = 1.0;
  // Gradient bound on {|x - (2, 0)| <= 3}, which contains every point the
  // solver can reach from x_start.
  in.G_f = 6.0;

  const Vector target = (Vector(d) << 2.0, 0.0).finished();
  p.spec.objective = [target](const Vector& x) {
    const Vector r = x - target;
    return EvalPair{r.squaredNorm(), 2.0 * r};
  };
  p.spec.constraint = [](const Vector& x) {
    Vector grad = Vector::Zero(2);
    grad(0) = x(0) >= 0 ? 1.0 : -1.0;
    return EvalPair{std::abs(x(0)) - 1.0, grad};
  };
  p.spec.truth.f_star = 1.0;
  p.spec.truth.x_star = (Vector(d) << 1.0, 0.0).finished();
  p.spec.truth.lambda_star = 2.0;
  return p;
}

}  // namespace safepd
