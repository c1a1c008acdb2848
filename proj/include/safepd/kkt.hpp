#pragma once

#include <algorithm>
#include <cmath>

#include "safepd/core.hpp"
#include "safepd/problem.hpp"

namespace safepd {

/// Residuals of the KKT conditions at a primal-dual pair.
struct KKTResidual {
  double grad_norm = 0.0;      ///< |grad f + lambda grad g|
  double comp_slack = 0.0;     ///< |lambda g(x)|
  double lambda_nonneg = 0.0;  ///< max(0, -lambda)
  double g_value = 0.0;
  bool feasible = true;        ///< g(x) <= 0

  /// (eps_p, eps_c)-KKT.
  bool within(double eps_p, double eps_c) const {
    return feasible && lambda_nonneg == 0.0 && grad_norm <= eps_p && comp_slack <= eps_c;
  }
};

inline KKTResidual kkt_residual(const ProblemSpec& spec, const Vector& x, double lambda) {
  const TrueEval e = eval_true(spec, x);
  KKTResidual r;
  r.grad_norm = (e.f.gradient + lambda * e.g.gradient).norm();
  r.comp_slack = std::abs(lambda * e.g.value);
  r.lambda_nonneg = std::max(0.0, -lambda);
  r.g_value = e.g.value;
  r.feasible = e.g.value <= 0.0;
  return r;
}

}  // namespace safepd
