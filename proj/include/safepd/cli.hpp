#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "safepd/baseline.hpp"
#include "safepd/io.hpp"
#include "safepd/runner.hpp"
#include "safepd/verify.hpp"

namespace safepd::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kBudget = 3 };

enum class LogLevel { Quiet, Info, Debug };

/// SAFEPD_LOG = quiet | info | debug (default info).
inline LogLevel log_level() {
  const char* v = std::getenv("SAFEPD_LOG");
  if (v == nullptr) return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet" || s == "0" || s == "off") return LogLevel::Quiet;
  if (s == "debug" || s == "2") return LogLevel::Debug;
  return LogLevel::Info;
}

inline int exit_code_for(Outcome o) {
  switch (o) {
    case Outcome::Converged: return kOk;
    case Outcome::BudgetExceeded:
    case Outcome::HorizonReached:
    case Outcome::OuterCapReached: return kBudget;
    case Outcome::SafetyAbort:
    case Outcome::BoundaryFloor: return kCheckFailed;
  }
  return kCheckFailed;
}

inline std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config file '" + path + "'");
  return parse_config(in);
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw std::ios_base::failure("failed writing '" + p.string() + "'");
}

inline std::string trace_text(const RunConfig& c, const RunOutput& out) {
  return trace_to_json(out.trace, run_metadata(c, out)).dump() + "\n";
}

inline std::string ledger_text(const RunOutput& out) {
  std::ostringstream s;
  out.ledger.write_csv(s, out.spec.info.dim);
  return s.str();
}

inline std::string algorithm_label(const std::string& a) { return a == "lbsgd" ? kLbsgdName : a; }

/// `run`: one solve, trace.json and ledger.csv in the output directory.
inline int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir,
                   const std::string& algo, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = load_config(config_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  const std::uint64_t s = seed.value_or(c.seed);
  const std::string a = algo.empty() ? c.algorithms.front() : algo;
  RunOutput r;
  try {
    RunConfig single = c;
    single.algorithms = {a};
    single.validate();
    r = execute_run(single, a, s);
    c = single;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  try {
    std::filesystem::create_directories(out_dir);
    write_text(std::filesystem::path(out_dir) / "trace.json", trace_text(c, r));
    write_text(std::filesystem::path(out_dir) / "ledger.csv", ledger_text(r));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  if (log_level() != LogLevel::Quiet) {
    const KKTResidual& k = *r.trace.final_kkt;
    out << "algorithm=" << r.trace.algorithm << " problem=" << r.trace.problem << " seed=" << s
        << " outcome=" << to_string(r.trace.outcome) << " calls=" << r.trace.total_calls
        << " gap=" << (r.final_gap ? fmt(*r.final_gap) : std::string("n/a")) << " kkt_grad=" << fmt(k.grad_norm)
        << " kkt_comp=" << fmt(k.comp_slack) << " feasible=" << (k.feasible ? "yes" : "no")
        << " violations=deferred-to-audit\n";
    if (!r.trace.diagnostic.empty()) err << "note: " << r.trace.diagnostic << "\n";
  }
  return exit_code_for(r.trace.outcome);
}

struct BenchRow {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string outcome;
  std::int64_t calls = 0;
  std::int64_t ledger_samples = 0;
  std::int64_t violations = 0;
  double final_gap = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> curve;
};

inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string summary_csv(const std::vector<BenchRow>& rows, const std::vector<std::int64_t>& budgets) {
  std::ostringstream s;
  s << "algorithm,seed,outcome,calls,violations,final_gap";
  for (std::int64_t b : budgets) s << ",best_gap@" << b;
  s << "\n";
  char buf[40];
  for (const BenchRow& r : rows) {
    s << r.algorithm << ',' << r.seed << ',' << r.outcome << ',' << r.calls << ',' << r.violations << ',';
    std::snprintf(buf, sizeof buf, "%.10g", r.final_gap);
    s << buf;
    for (double g : r.curve) {
      std::snprintf(buf, sizeof buf, "%.10g", g);
      s << ',' << buf;
    }
    s << "\n";
  }
  return s.str();
}

/// Runs one bench cell and writes its trace (and optionally ledger).
inline BenchRow bench_one(const RunConfig& c, const std::string& algo, std::uint64_t seed,
                          const std::vector<std::int64_t>& budgets, const std::filesystem::path& dir) {
  BenchRow row;
  row.algorithm = algorithm_label(algo);
  row.seed = seed;
  try {
    RunConfig single = c;
    single.algorithms = {algo};
    const RunOutput r = execute_run(single, algo, seed);
    const AuditReport a = audit_trace(r.trace, r.ledger, r.spec);
    row.outcome = to_string(r.trace.outcome);
    row.calls = r.trace.total_calls;
    row.ledger_samples = r.ledger.total_samples();
    row.violations = a.violations;
    if (r.final_gap) row.final_gap = *r.final_gap;
    row.curve = best_gap_curve(r.trace, r.spec, budgets);
    const std::string stem = row.algorithm + "_seed" + std::to_string(seed);
    write_text(dir / (stem + ".trace.json"), trace_text(single, r));
    if (c.write_ledgers) write_text(dir / (stem + ".ledger.csv"), ledger_text(r));
  } catch (const InputError& e) {
    row.outcome = std::string("error: ") + e.what();
    row.curve.assign(budgets.size(), std::numeric_limits<double>::quiet_NaN());
  }
  return row;
}

/// `bench`: algorithm x seed cross-product, per-run traces, summary.csv.
inline int cmd_bench(const std::string& config_path, std::optional<std::int64_t> seeds,
                     std::optional<std::uint64_t> base_seed, const std::string& out_dir, const std::string& algo,
                     std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = load_config(config_path);
    if (!algo.empty()) c.algorithms = detail::parse_list(algo);
    if (seeds) c.seeds = *seeds;
    if (base_seed) c.seed = *base_seed;
    c.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  const std::int64_t lo = std::min<std::int64_t>(100, c.max_oracle_calls);
  const std::vector<std::int64_t> budgets = log_budgets(lo, c.max_oracle_calls, 32);
  const std::filesystem::path dir(out_dir);
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  struct Cell {
    std::string algo;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const std::string& a : c.algorithms) {
    for (std::int64_t k = 0; k < c.seeds; ++k) cells.push_back({a, c.seed + static_cast<std::uint64_t>(k)});
  }
  if (cells.empty()) err << "warning: no seeds requested; summary is empty\n";

  std::vector<BenchRow> rows(cells.size());
  try {
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t start = 0; start < cells.size(); start += workers) {
      std::vector<std::future<BenchRow>> jobs;
      const std::size_t stop = std::min(cells.size(), start + workers);
      for (std::size_t i = start; i < stop; ++i) {
        jobs.push_back(std::async(std::launch::async, bench_one, std::cref(c), cells[i].algo, cells[i].seed,
                                  std::cref(budgets), std::cref(dir)));
      }
      for (std::size_t i = start; i < stop; ++i) rows[i] = jobs[i - start].get();
    }
    write_text(dir / "summary.csv", summary_csv(rows, budgets));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  if (log_level() != LogLevel::Quiet) {
    for (const std::string& a : c.algorithms) {
      std::vector<double> last;
      for (const BenchRow& r : rows) {
        if (r.algorithm == algorithm_label(a) && !r.curve.empty()) last.push_back(r.curve.back());
      }
      out << "algorithm=" << algorithm_label(a) << " runs=" << last.size()
          << " median_best_gap@" << budgets.back() << "=" << fmt(median(last)) << "\n";
    }
  }
  const bool has_scsa = std::count(c.algorithms.begin(), c.algorithms.end(), "scsa") > 0;
  const bool has_lbsgd = std::count(c.algorithms.begin(), c.algorithms.end(), "lbsgd") > 0;
  if (has_scsa && has_lbsgd && !rows.empty()) {
    std::vector<double> a, b;
    for (const BenchRow& r : rows) {
      if (r.curve.empty()) continue;
      (r.algorithm == "scsa" ? a : b).push_back(r.curve.back());
    }
    const double ma = median(a), mb = median(b);
    out << "comparison: scsa median best gap " << fmt(ma) << " vs " << kLbsgdName << " " << fmt(mb) << "\n";
    if (!(ma <= mb)) err << "warning: scsa median best gap exceeds the " << kLbsgdName << " baseline\n";
  }
  return kOk;
}

/// `audit`: ground-truth safety audit of a saved trace and ledger.
inline int cmd_audit(const std::string& trace_path, const std::string& ledger_path, std::ostream& out,
                     std::ostream& err) {
  try {
    std::ifstream tf(trace_path);
    if (!tf) throw std::ios_base::failure("cannot open trace '" + trace_path + "'");
    std::ifstream lf(ledger_path);
    if (!lf) throw std::ios_base::failure("cannot open ledger '" + ledger_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(tf);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("trace is not valid JSON: ") + e.what());
    }
    const RunTrace trace = trace_from_json(j);
    require(j.contains("config"), "trace has no config snapshot; cannot rebuild the problem");
    const ProblemSpec spec = problem_for(config_from_json(j.at("config")));
    const QueryLedger ledger = QueryLedger::read_csv(lf);
    const AuditReport rep = audit_trace(trace, ledger, spec);
    out << rep.to_json().dump(2) << "\n";
    return rep.violations > 0 ? kCheckFailed : kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

/// `verify`: numeric checks on an analytic benchmark.
inline int cmd_verify(const std::string& problem, int dim, std::optional<double> param, const std::string& check,
                      int grid_points, std::ostream& out, std::ostream& err) {
  ProblemSpec spec;
  try {
    RunConfig c;
    c.problem = problem;
    c.dim = dim;
    if (param) c.problem_param = *param;
    spec = problem_for(c);
    require(check == "dual-regularity" || check == "bisection" || check == "gradients" || check == "all",
            "unknown check '" + check + "' (expected dual-regularity, bisection, gradients or all)");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  bool ok = true;
  nlohmann::json report;
  try {
    if (check == "gradients" || check == "all") {
      Rng rng(12345);
      const auto pts = sample_feasible_points(spec, 100, 2.0 * spec.info.R, rng);
      const GradientCheck g = check_gradients(spec, pts);
      report["gradients"] = {{"points", g.points},
                             {"max_error_f", g.max_error_f},
                             {"max_error_g", g.max_error_g},
                             {"passed", g.passed(1e-5)}};
      ok = ok && g.passed(1e-5);
    }
    if (check == "bisection" || check == "all") {
      require(spec.info.mu_f > 0, "bisection needs a strongly convex objective");
      const double hi = initial_dual(spec.info.delta_f, spec.info.alpha);
      const double ls = dual_opt_bisection(spec, hi, 1e-9);
      nlohmann::json b = {{"lambda_star", ls}, {"lambda_hi", hi}};
      if (spec.truth.lambda_star) {
        const bool pass = std::abs(ls - *spec.truth.lambda_star) <= 1e-6;
        b["closed_form"] = *spec.truth.lambda_star;
        b["passed"] = pass;
        ok = ok && pass;
      }
      report["bisection"] = b;
    }
    if (check == "dual-regularity" || check == "all") {
      const RegularityReport r = check_dual_regularity(spec, dual_grid(spec, grid_points));
      report["dual_regularity"] = r.to_json();
      ok = ok && r.passed;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  report["passed"] = ok;
  out << report.dump(2) << "\n";
  return ok ? kOk : kCheckFailed;
}

/// Entry point shared by the executable and the tests.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Safe primal-dual black-box optimization"};
  app.require_subcommand(1);

  std::string config, out_dir = ".", algo, trace_path, ledger_path, problem = "quadratic", check = "all";
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> seeds;
  std::optional<double> param;
  int dim = 2, grid = 64;

  auto* run = app.add_subcommand("run", "run one solve and write trace.json and ledger.csv");
  run->add_option("--config", config, "config file")->required();
  run->add_option("--seed", seed, "random seed (overrides the config)");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--algo", algo, "scsa | convex | safepd | lbsgd");

  auto* bench = app.add_subcommand("bench", "algorithm x seed cross-product with a summary CSV");
  bench->add_option("--config", config, "config file")->required();
  bench->add_option("--seeds", seeds, "number of seeds");
  bench->add_option("--seed", seed, "first seed");
  bench->add_option("--out", out_dir, "output directory");
  bench->add_option("--algo", algo, "comma-separated algorithm list");

  auto* audit = app.add_subcommand("audit", "ground-truth safety audit of a saved run");
  audit->add_option("--trace", trace_path, "trace JSON")->required();
  audit->add_option("--ledger", ledger_path, "ledger CSV")->required();

  auto* verify = app.add_subcommand("verify", "numeric checks on a benchmark");
  verify->add_option("--problem", problem, "quadratic | nonconvex-gaussian");
  verify->add_option("--dim", dim, "dimension");
  verify->add_option("--param", param, "benchmark parameter");
  verify->add_option("--check", check, "dual-regularity | bisection | gradients | all");
  verify->add_option("--grid", grid, "dual grid size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  if (*run) return cmd_run(config, seed, out_dir, algo, out, err);
  if (*bench) return cmd_bench(config, seeds, seed, out_dir, algo, out, err);
  if (*audit) return cmd_audit(trace_path, ledger_path, out, err);
  if (*verify) return cmd_verify(problem, dim, param, check, grid, out, err);
  return kUsage;
}

inline int main(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"safepd"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace safepd::cli
