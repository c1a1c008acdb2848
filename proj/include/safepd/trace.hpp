#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safepd/core.hpp"
#include "safepd/kkt.hpp"

namespace safepd {

enum class Outcome {
  Converged,        ///< the stopping rule fired
  BudgetExceeded,   ///< the oracle budget ran out
  HorizonReached,   ///< the outer iteration bound ran out
  OuterCapReached,  ///< the proximal round cap ran out
  SafetyAbort,      ///< an empty safety region was detected
  BoundaryFloor,    ///< barrier baseline: the constraint margin fell below its floor
};

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Converged: return "converged";
    case Outcome::BudgetExceeded: return "budget-exceeded";
    case Outcome::HorizonReached: return "horizon-reached";
    case Outcome::OuterCapReached: return "outer-cap-reached";
    case Outcome::SafetyAbort: return "safety-abort";
    case Outcome::BoundaryFloor: return "boundary-floor";
  }
  return "unknown";
}

inline Outcome outcome_from_string(const std::string& s) {
  for (Outcome o : {Outcome::Converged, Outcome::BudgetExceeded, Outcome::HorizonReached, Outcome::OuterCapReached,
                    Outcome::SafetyAbort, Outcome::BoundaryFloor}) {
    if (s == to_string(o)) return o;
  }
  throw InputError("unknown outcome '" + s + "'");
}

enum class Phase {
  Preliminary,  ///< descent to the initial primal point
  Outer,        ///< regular dual iteration
  Terminal,     ///< last dual iteration, solved to the terminal accuracy
  Barrier,      ///< log-barrier baseline step
};

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Preliminary: return "preliminary";
    case Phase::Outer: return "outer";
    case Phase::Terminal: return "terminal";
    case Phase::Barrier: return "barrier";
  }
  return "unknown";
}

inline Phase phase_from_string(const std::string& s) {
  for (Phase p : {Phase::Preliminary, Phase::Outer, Phase::Terminal, Phase::Barrier}) {
    if (s == to_string(p)) return p;
  }
  throw InputError("unknown phase '" + s + "'");
}

/// One dual iteration: UCB at x, dual step to lambda_next, primal solve
/// inside the safety ball around x producing x_next.
struct DualState {
  int round = 0;  ///< proximal round (0 outside the proximal method)
  std::int64_t t = 0;
  Phase phase = Phase::Outer;
  Vector x;
  double lambda = 0.0;
  double lambda_next = 0.0;
  double g_hat = 0.0;
  double eps = 0.0;
  double safety_radius = 0.0;
  double eta = 0.0;
  std::int64_t ucb_samples = 0;
  std::int64_t inner_calls = 0;
  std::int64_t inner_iterations = 0;
  std::int64_t cumulative_calls = 0;  ///< oracle calls spent once x_next is known
  std::int64_t ledger_begin = 0;      ///< ledger slice of the primal solve
  std::int64_t ledger_end = 0;
  Vector x_next;
};

/// One proximal round.
struct OuterState {
  int k = 0;
  Vector x;              ///< x_k
  double lambda = 0.0;   ///< lambda_k
  double lambda_warm = 0.0;
  double eta = 0.0;      ///< accuracy of the last subproblem solve
  double eta_warm = 0.0;
  double beta = 0.0;     ///< -g_hat at the round's center
  double step_norm = 0.0;
  std::int64_t scsa_iterations = 0;
  std::int64_t cumulative_calls = 0;
};

struct RunTrace {
  std::string algorithm;
  std::string problem;
  int dim = 0;
  std::uint64_t seed = 0;
  std::vector<DualState> records;
  std::vector<OuterState> rounds;
  Outcome outcome = Outcome::Converged;
  std::string diagnostic;
  Vector x_final;
  double lambda_final = 0.0;
  double final_eta = 0.0;
  std::int64_t total_calls = 0;
  std::int64_t horizon = 0;
  /// Largest distance between a ledger point and the point the solver meant
  /// to query (finite-difference probes).
  double query_perturbation = 0.0;
  std::optional<KKTResidual> final_kkt;
};

}  // namespace safepd
