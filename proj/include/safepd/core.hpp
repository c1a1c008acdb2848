#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace safepd {

using Vector = Eigen::VectorXd;

/// One generator per run drives every random draw (oracle noise, smoothing
/// directions). Same seed, same trace.
using Rng = std::mt19937_64;

/// Precondition or configuration problem detected before any work is done.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// The certified safety region turned out to be empty (a constraint upper
/// bound came back non-negative). Runs abort on this.
class SafetyViolation : public std::runtime_error {
 public:
  explicit SafetyViolation(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

inline void require_dim(const Vector& x, int dim, const char* who) {
  if (x.size() != dim) {
    throw InputError(std::string(who) + ": expected dimension " + std::to_string(dim) +
                     ", got " + std::to_string(x.size()));
  }
}

}  // namespace safepd
