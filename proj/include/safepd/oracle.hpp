#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "safepd/core.hpp"
#include "safepd/problem.hpp"

namespace safepd {

/// Zero-mean Gaussian measurement noise. sigma applies to values,
/// sigma_hat to gradients (total variance across coordinates).
struct NoiseModel {
  double sigma = 0.0;
  double sigma_hat = 0.0;
};

struct ValueSample {
  double f_value = 0.0;
  double g_value = 0.0;
  std::int64_t query_index = 0;
};

/// Noisy measurement bundle (F, grad F, G, grad G), averaged over the
/// requested number of draws.
struct OracleSample {
  double f_value = 0.0;
  Vector f_grad;
  double g_value = 0.0;
  Vector g_grad;
  std::int64_t query_index = 0;
};

struct LedgerRecord {
  std::int64_t query_index = 0;
  Vector x;
  std::int64_t n_samples = 0;
};

/// Append-only log of every point the oracle was asked about.
class QueryLedger {
 public:
  std::int64_t append(const Vector& x, std::int64_t n_samples) {
    const auto index = static_cast<std::int64_t>(records_.size());
    records_.push_back({index, x, n_samples});
    total_ += n_samples;
    return index;
  }

  const std::vector<LedgerRecord>& records() const { return records_; }
  std::int64_t size() const { return static_cast<std::int64_t>(records_.size()); }
  std::int64_t total_samples() const { return total_; }
  bool empty() const { return records_.empty(); }

  /// CSV: query_index, x_0 .. x_{d-1}, n_samples.
  void write_csv(std::ostream& out, int dim) const {
    out << "query_index";
    for (int i = 0; i < dim; ++i) out << ",x_" << i;
    out << ",n_samples\n";
    char buf[32];
    for (const LedgerRecord& r : records_) {
      out << r.query_index;
      for (int i = 0; i < r.x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", r.x(i));
        out << ',' << buf;
      }
      out << ',' << r.n_samples << '\n';
    }
  }

  static QueryLedger read_csv(std::istream& in) {
    QueryLedger ledger;
    std::string line;
    if (!std::getline(in, line)) return ledger;
    int dim = 0;
    {
      std::stringstream header(line);
      std::string cell;
      std::vector<std::string> cols;
      while (std::getline(header, cell, ',')) cols.push_back(cell);
      require(cols.size() >= 2 && cols.front() == "query_index" && cols.back() == "n_samples",
              "ledger CSV: unexpected header '" + line + "'");
      dim = static_cast<int>(cols.size()) - 2;
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(row, cell, ',')) cells.push_back(cell);
      require(static_cast<int>(cells.size()) == dim + 2, "ledger CSV: malformed row '" + line + "'");
      Vector x(dim);
      for (int i = 0; i < dim; ++i) x(i) = std::stod(cells[i + 1]);
      const std::int64_t index = std::stoll(cells.front());
      require(index == ledger.size(), "ledger CSV: query indices must be consecutive");
      ledger.append(x, std::stoll(cells.back()));
    }
    return ledger;
  }

 private:
  std::vector<LedgerRecord> records_;
  std::int64_t total_ = 0;
};

/// Value-only (zeroth-order) black box.
class ValueOracle {
 public:
  virtual ~ValueOracle() = default;

  virtual int dim() const = 0;
  /// Sub-Gaussian parameter of a single value measurement.
  virtual double value_sigma() const = 0;
  /// Mean of n independent measurements of (F, G) at x. Costs n calls.
  virtual ValueSample sample_values(const Vector& x, std::int64_t n, Rng& rng) = 0;
  virtual const QueryLedger& ledger() const = 0;

  std::int64_t calls() const { return ledger().total_samples(); }
};

/// First-order black box: values and gradients of f and g.
class FirstOrderOracle : public ValueOracle {
 public:
  /// Noise level of a single gradient measurement (norm scale).
  virtual double grad_sigma() const = 0;
  /// Mean of n independent first-order measurements at x. Costs n calls.
  virtual OracleSample sample(const Vector& x, std::int64_t n, Rng& rng) = 0;
  /// Calls charged per first-order draw.
  virtual std::int64_t sample_cost() const { return 1; }

  OracleSample query(const Vector& x, Rng& rng) { return sample(x, 1, rng); }
};

/// Simulates the noisy oracle on top of an analytic problem. The mean of n
/// Gaussian draws is drawn directly from its own distribution.
class SimulatedOracle final : public FirstOrderOracle {
 public:
  SimulatedOracle(const ProblemSpec& spec, NoiseModel noise)
      : dim_(spec.info.dim), objective_(spec.objective), constraint_(spec.constraint), noise_(noise) {
    require(std::isfinite(noise.sigma) && noise.sigma >= 0, "noise sigma must be finite and >= 0");
    require(std::isfinite(noise.sigma_hat) && noise.sigma_hat >= 0,
            "noise sigma_hat must be finite and >= 0");
  }

  int dim() const override { return dim_; }
  double value_sigma() const override { return noise_.sigma; }
  double grad_sigma() const override { return noise_.sigma_hat; }
  const QueryLedger& ledger() const override { return ledger_; }
  const NoiseModel& noise() const { return noise_; }

  ValueSample sample_values(const Vector& x, std::int64_t n, Rng& rng) override {
    check(x, n);
    ValueSample s;
    s.f_value = objective_(x).value + value_noise(n, rng);
    s.g_value = constraint_(x).value + value_noise(n, rng);
    s.query_index = ledger_.append(x, n);
    return s;
  }

  OracleSample sample(const Vector& x, std::int64_t n, Rng& rng) override {
    check(x, n);
    const EvalPair f = objective_(x);
    const EvalPair g = constraint_(x);
    OracleSample s;
    s.f_value = f.value + value_noise(n, rng);
    s.f_grad = f.gradient + grad_noise(n, rng);
    s.g_value = g.value + value_noise(n, rng);
    s.g_grad = g.gradient + grad_noise(n, rng);
    s.query_index = ledger_.append(x, n);
    return s;
  }

 private:
  void check(const Vector& x, std::int64_t n) const {
    require_dim(x, dim_, "oracle query");
    require(n >= 1, "oracle query needs at least one sample");
  }

  double value_noise(std::int64_t n, Rng& rng) const {
    if (noise_.sigma == 0.0) return 0.0;
    std::normal_distribution<double> z(0.0, noise_.sigma / std::sqrt(static_cast<double>(n)));
    return z(rng);
  }

  Vector grad_noise(std::int64_t n, Rng& rng) const {
    if (noise_.sigma_hat == 0.0) return Vector::Zero(dim_);
    const double sd = noise_.sigma_hat / std::sqrt(static_cast<double>(n) * dim_);
    std::normal_distribution<double> z(0.0, sd);
    Vector v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = z(rng);
    return v;
  }

  int dim_;
  AnalyticMap objective_;
  AnalyticMap constraint_;
  NoiseModel noise_;
  QueryLedger ledger_;
};

/// Turns a value-only oracle into a first-order one with central
/// differences: 2d value queries per gradient plus one at x itself.
class FiniteDifferenceOracle final : public FirstOrderOracle {
 public:
  FiniteDifferenceOracle(ValueOracle& base, double h) : base_(base), h_(h) {
    require(h > 0 && std::isfinite(h), "finite-difference step must be positive");
  }

  int dim() const override { return base_.dim(); }
  double value_sigma() const override { return base_.value_sigma(); }
  /// Each coordinate is (F+ - F-)/(2h): standard deviation sigma*sqrt(2)/(2h).
  double grad_sigma() const override {
    return base_.value_sigma() * std::sqrt(2.0 * dim()) / (2.0 * h_);
  }
  const QueryLedger& ledger() const override { return base_.ledger(); }
  std::int64_t sample_cost() const override { return 2 * dim() + 1; }
  double step() const { return h_; }

  ValueSample sample_values(const Vector& x, std::int64_t n, Rng& rng) override {
    return base_.sample_values(x, n, rng);
  }

  OracleSample sample(const Vector& x, std::int64_t n, Rng& rng) override {
    const ValueSample center = base_.sample_values(x, n, rng);
    OracleSample s;
    s.f_value = center.f_value;
    s.g_value = center.g_value;
    s.query_index = center.query_index;
    s.f_grad.resize(dim());
    s.g_grad.resize(dim());
    Vector probe = x;
    for (int i = 0; i < dim(); ++i) {
      probe(i) = x(i) + h_;
      const ValueSample plus = base_.sample_values(probe, n, rng);
      probe(i) = x(i) - h_;
      const ValueSample minus = base_.sample_values(probe, n, rng);
      probe(i) = x(i);
      s.f_grad(i) = (plus.f_value - minus.f_value) / (2.0 * h_);
      s.g_grad(i) = (plus.g_value - minus.g_value) / (2.0 * h_);
    }
    return s;
  }

 private:
  ValueOracle& base_;
  double h_;
};

inline FiniteDifferenceOracle fd_gradient_adapter(ValueOracle& base, double h) {
  return FiniteDifferenceOracle(base, h);
}

/// View of an oracle with exactly known proximal terms added:
///   f + rho_f/2 |x - c|^2,  g + rho_g/2 |x - c|^2.
/// Queries go to the wrapped oracle (and its ledger) unchanged.
class ProximalOracle final : public FirstOrderOracle {
 public:
  ProximalOracle(FirstOrderOracle& base, Vector center, double rho_f, double rho_g)
      : base_(base), center_(std::move(center)), rho_f_(rho_f), rho_g_(rho_g) {
    require_dim(center_, base.dim(), "proximal center");
    require(rho_f >= 0 && rho_g >= 0, "proximal weights must be non-negative");
  }

  int dim() const override { return base_.dim(); }
  double value_sigma() const override { return base_.value_sigma(); }
  double grad_sigma() const override { return base_.grad_sigma(); }
  const QueryLedger& ledger() const override { return base_.ledger(); }
  std::int64_t sample_cost() const override { return base_.sample_cost(); }
  const Vector& center() const { return center_; }

  ValueSample sample_values(const Vector& x, std::int64_t n, Rng& rng) override {
    ValueSample s = base_.sample_values(x, n, rng);
    const double q = 0.5 * (x - center_).squaredNorm();
    s.f_value += rho_f_ * q;
    s.g_value += rho_g_ * q;
    return s;
  }

  OracleSample sample(const Vector& x, std::int64_t n, Rng& rng) override {
    OracleSample s = base_.sample(x, n, rng);
    const Vector diff = x - center_;
    const double q = 0.5 * diff.squaredNorm();
    s.f_value += rho_f_ * q;
    s.g_value += rho_g_ * q;
    s.f_grad += rho_f_ * diff;
    s.g_grad += rho_g_ * diff;
    return s;
  }

 private:
  FirstOrderOracle& base_;
  Vector center_;
  double rho_f_;
  double rho_g_;
};

/// Upper confidence bound on g(x) from a minibatch.
struct UcbEstimate {
  double g_hat = 0.0;
  double mean = 0.0;
  double bonus = 0.0;
  std::int64_t n_used = 0;
  std::int64_t query_index = 0;
};

/// n = max(1, ceil(4 sigma^2 / eps^2 * ln(T/delta))).
inline std::int64_t ucb_sample_size(double sigma, double eps_t, std::int64_t T_max, double delta) {
  require(eps_t > 0, "constraint accuracy eps_t must be positive");
  require(T_max >= 1, "horizon T_max must be at least 1");
  require(delta > 0 && delta < 1, "confidence delta must lie in (0, 1)");
  const double log_term = std::log(static_cast<double>(T_max) / delta);
  const double n = std::ceil(4.0 * sigma * sigma / (eps_t * eps_t) * log_term);
  constexpr double kMaxSamples = 1e15;
  if (!(n >= 1.0)) return 1;
  return static_cast<std::int64_t>(std::min(n, kMaxSamples));
}

/// g_hat = mean of n draws of G(x) + sigma * sqrt(ln(T/delta) / n).
inline UcbEstimate estimate_constraint_ucb(ValueOracle& oracle, const Vector& x, double eps_t,
                                           std::int64_t T_max, double delta, Rng& rng) {
  const std::int64_t n = ucb_sample_size(oracle.value_sigma(), eps_t, T_max, delta);
  const ValueSample s = oracle.sample_values(x, n, rng);
  UcbEstimate est;
  est.n_used = n;
  est.mean = s.g_value;
  est.bonus = oracle.value_sigma() *
              std::sqrt(std::log(static_cast<double>(T_max) / delta) / static_cast<double>(n));
  est.g_hat = est.mean + est.bonus;
  est.query_index = s.query_index;
  return est;
}

}  // namespace safepd
