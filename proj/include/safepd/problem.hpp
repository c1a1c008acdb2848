#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "safepd/core.hpp"

namespace safepd {

enum class ConvexityClass { StronglyConvex, Convex, NonConvex };

inline const char* to_string(ConvexityClass c) {
  switch (c) {
    case ConvexityClass::StronglyConvex: return "strongly-convex";
    case ConvexityClass::Convex: return "convex";
    case ConvexityClass::NonConvex: return "non-convex";
  }
  return "unknown";
}

/// Function value together with its gradient at one point.
struct EvalPair {
  double value = 0.0;
  Vector gradient;
};

using AnalyticMap = std::function<EvalPair(const Vector&)>;

/// Regularity constants and the safe start. This is everything a solver is
/// allowed to know about a problem; the functions themselves are reached only
/// through an oracle.
struct ProblemInfo {
  std::string name;
  int dim = 0;
  double mu_f = 0.0;  ///< strong convexity of f (0 when merely convex / non-convex)
  double M_f = 0.0;   ///< smoothness of f
  double mu_g = 0.0;  ///< strong convexity of g (0 when merely convex / non-convex)
  double M_g = 0.0;   ///< smoothness of g
  double L_g = 0.0;   ///< Lipschitz constant of g on the feasible set
  double alpha = 0.0; ///< -g(x_start) >= alpha
  double beta = 0.0;  ///< max depth of the feasible set, beta >= alpha
  double delta_f = 0.0;
  double R = 0.0;     ///< bound on |x_start - x*|
  double G_f = 0.0;   ///< gradient-norm bounds over the feasible set
  double G_g = 0.0;
  /// Constraint-qualification constants (|grad g| >= l wherever g >= -theta).
  /// Informational; no solver reads them.
  double mfcq_theta = 0.0;
  double mfcq_l = 0.0;
  Vector x_start;
  ConvexityClass convexity = ConvexityClass::NonConvex;
};

/// Known optimum, when the benchmark has a closed form.
struct GroundTruth {
  std::optional<double> f_star;
  std::optional<Vector> x_star;
  std::optional<double> lambda_star;
};

struct ProblemSpec {
  ProblemInfo info;
  AnalyticMap objective;
  AnalyticMap constraint;
  GroundTruth truth;
};

struct TrueEval {
  EvalPair f;
  EvalPair g;
};

/// Exact objective and constraint at x. Reserved for verification and
/// auditing code; solvers never see a ProblemSpec.
inline TrueEval eval_true(const ProblemSpec& spec, const Vector& x) {
  require_dim(x, spec.info.dim, "eval_true");
  return {spec.objective(x), spec.constraint(x)};
}

/// Checks the structural invariants every spec has to satisfy.
inline void validate(const ProblemSpec& spec) {
  const ProblemInfo& in = spec.info;
  require(in.dim > 0, "problem dimension must be positive");
  require_dim(in.x_start, in.dim, "x_start");
  require(in.M_f > 0 && in.M_g > 0, "smoothness constants must be positive");
  require(in.L_g > 0, "L_g must be positive");
  require(in.alpha > 0, "alpha must be positive");
  require(in.beta >= in.alpha, "beta must be at least alpha");
  require(in.delta_f >= 0 && in.R > 0, "delta_f must be non-negative and R positive");
  if (in.convexity == ConvexityClass::StronglyConvex) {
    require(in.mu_f > 0 && in.M_f >= in.mu_f, "strongly convex spec needs 0 < mu_f <= M_f");
  }
  const double g0 = spec.constraint(in.x_start).value;
  require(-g0 >= in.alpha * (1.0 - 1e-12), "x_start must satisfy -g(x_start) >= alpha");
}

namespace detail {

inline Vector unit_last(int d, double value) {
  Vector v = Vector::Zero(d);
  v(d - 1) = value;
  return v;
}

}  // namespace detail

/// min |x - target|^2  s.t.  |Ax - b|^2 - 4 <= 0, with A = diag(1,..,1,2),
/// b = e_d, target = target_last * e_d. The start is the constraint
/// minimizer 0.5 * e_d (g = -4).
///
/// Everything reduces to a one-dimensional problem along the last axis:
/// for target_last > 1.5 the optimum is 1.5 * e_d with multiplier
/// (target_last - 1.5) / 4, and x_lambda = (target_last + 2 lambda) / (1 + 4 lambda) * e_d.
inline ProblemSpec make_quadratic_benchmark(int d, double target_last = 5.0) {
  require(d >= 2, "quadratic benchmark needs d >= 2");
  require(target_last > -0.5, "quadratic benchmark target must lie above the ellipse bottom");

  const Vector target = detail::unit_last(d, target_last);

  ProblemSpec spec;
  ProblemInfo& in = spec.info;
  in.name = "quadratic";
  in.dim = d;
  in.convexity = ConvexityClass::StronglyConvex;
  in.x_start = detail::unit_last(d, 0.5);
  in.mu_f = 2.0;
  in.M_f = 2.0;
  in.mu_g = 2.0;
  in.M_g = 8.0;
  // |grad g|^2 = 4 sum_{i<d} x_i^2 + 16 (2 x_d - 1)^2 peaks at 16 * 4 on the
  // boundary of the ellipse sum x_i^2 + (2 x_d - 1)^2 <= 4.
  in.L_g = 8.0;
  in.G_g = 8.0;
  in.alpha = 4.0;
  in.beta = 4.0;

  // On the boundary, with u = 2 x_d - 1, f = 4 - u^2 + ((u + 1)/2 - c)^2 is
  // concave in u; its maximum over u in [-2, 2] bounds f on the whole set.
  const double c = target_last;
  auto boundary_f = [c](double u) { return 4.0 - u * u + std::pow((u + 1.0) / 2.0 - c, 2); };
  const double u_stat = std::clamp((0.5 - c) / 1.5, -2.0, 2.0);
  const double f_max = std::max({boundary_f(-2.0), boundary_f(2.0), boundary_f(u_stat)});

  double x_star_last = c;
  double lambda_star = 0.0;
  if (c > 1.5) {
    x_star_last = 1.5;
    lambda_star = (c - 1.5) / 4.0;
  }
  const double f_star = (c - x_star_last) * (c - x_star_last);
  in.delta_f = f_max - f_star;
  in.G_f = 2.0 * std::sqrt(f_max);
  in.R = std::max(std::abs(x_star_last - 0.5), 1e-9);

  spec.objective = [target](const Vector& x) {
    const Vector r = x - target;
    return EvalPair{r.squaredNorm(), 2.0 * r};
  };
  spec.constraint = [d](const Vector& x) {
    Vector r = x;
    r(d - 1) = 2.0 * x(d - 1) - 1.0;
    Vector grad = 2.0 * r;
    grad(d - 1) *= 2.0;
    return EvalPair{r.squaredNorm() - 4.0, grad};
  };
  spec.truth.f_star = f_star;
  spec.truth.x_star = detail::unit_last(d, x_star_last);
  spec.truth.lambda_star = lambda_star;
  return spec;
}

/// Inverted Gaussian over an elongated ellipsoid:
///   min exp(-4 |x|^2)  s.t.  0.2 |x - x0|^2 + 10 (x[1] - x0[1])^2 - r^2 <= 0,
/// x0 = (1, ..., 1) / sqrt(d). Non-convex objective, convex constraint.
inline ProblemSpec make_nonconvex_benchmark(int d, double r = 0.5) {
  require(d >= 2, "non-convex benchmark needs d >= 2");
  require(r > 0 && std::isfinite(r), "non-convex benchmark needs r > 0");

  const Vector x0 = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));

  ProblemSpec spec;
  ProblemInfo& in = spec.info;
  in.name = "nonconvex-gaussian";
  in.dim = d;
  in.convexity = ConvexityClass::NonConvex;
  in.x_start = x0;
  in.mu_f = 0.0;
  // Hessian of f is (-8 I + 64 x x^T) exp(-4|x|^2); its spectral norm peaks
  // at x = 0 with value 8.
  in.M_f = 8.0;
  in.mu_g = 0.4;
  in.M_g = 20.4;
  // With u = x - x0 the constraint is 0.2 |u|^2 + 10.2 u_1^2 <= r^2 and
  // |grad g|^2 = 0.16 |u_rest|^2 + 416.16 u_1^2; the ratio is largest (40.8)
  // along u_1.
  in.L_g = r * std::sqrt(40.8);
  in.G_g = in.L_g;
  in.alpha = r * r;
  in.beta = r * r;
  // |grad f| = 8 |x| exp(-4 |x|^2) is maximal at |x|^2 = 1/8.
  in.G_f = 2.0 * std::sqrt(2.0) * std::exp(-0.5);
  // |x0 - x*| is bounded by the longest semi-axis.
  in.R = r / std::sqrt(0.2);
  // On {g >= -theta}, |grad g|^2 >= 0.8 (g + r^2) >= 0.8 (r^2 - theta).
  in.mfcq_theta = in.beta / 2.0;
  in.mfcq_l = std::sqrt(0.8 * (r * r - in.mfcq_theta));

  // delta_f <= max f over the feasible set = exp(-4 dist(0, ellipsoid)^2).
  // Distance from the origin to the ellipsoid via the usual secular equation
  // sum_i (a_i^2 c_i / (a_i^2 + t))^2 / a_i^2 = 1 for t >= 0.
  {
    Vector semi = Vector::Constant(d, r / std::sqrt(0.2));
    semi(1) = r / std::sqrt(10.2);
    const Vector c = -x0;  // origin relative to the ellipsoid center
    auto level = [&](double t) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        const double a2 = semi(i) * semi(i);
        const double ui = a2 * c(i) / (a2 + t);
        s += ui * ui / a2;
      }
      return s;
    };
    double dist2 = 0.0;
    if (level(0.0) > 1.0) {
      double lo = 0.0, hi = 1.0;
      while (level(hi) > 1.0) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (level(mid) > 1.0 ? lo : hi) = mid;
      }
      for (int i = 0; i < d; ++i) {
        const double a2 = semi(i) * semi(i);
        const double ui = a2 * c(i) / (a2 + hi);
        dist2 += (ui - c(i)) * (ui - c(i));
      }
    }
    in.delta_f = std::exp(-4.0 * dist2);
  }

  spec.objective = [](const Vector& x) {
    const double v = std::exp(-4.0 * x.squaredNorm());
    return EvalPair{v, -8.0 * v * x};
  };
  spec.constraint = [x0, r](const Vector& x) {
    const Vector u = x - x0;
    Vector grad = 0.4 * u;
    grad(1) += 20.0 * u(1);
    return EvalPair{0.2 * u.squaredNorm() + 10.0 * u(1) * u(1) - r * r, grad};
  };
  return spec;
}

/// Canonical CLI identifiers.
inline ProblemSpec make_benchmark(const std::string& name, int d, double param) {
  if (name == "quadratic") return make_quadratic_benchmark(d, param);
  if (name == "nonconvex-gaussian") return make_nonconvex_benchmark(d, param);
  throw InputError("unknown problem '" + name + "'");
}

inline double default_benchmark_param(const std::string& name) {
  return name == "nonconvex-gaussian" ? 0.5 : 5.0;
}

}  // namespace safepd
