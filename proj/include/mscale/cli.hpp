#pragma once

// Command-line front end: verify | run | denoise | report.
//
// Exit codes: 0 success, 1 scientific failure (a claim or certificate did not
// hold where it must), 2 usage or configuration error.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mscale/counterexample.hpp"
#include "mscale/io.hpp"
#include "mscale/multiscale.hpp"
#include "mscale/operators.hpp"
#include "mscale/varsolve.hpp"

namespace mscale::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitScientific = 1;
inline constexpr int kExitUsage = 2;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VerifyConfig {
  std::vector<std::string> M{"6"};
  double alpha0 = 1.0;
  int n_max = 30;
  std::size_t J_max = 200;
  std::string out;
  unsigned threads = 0;
};

struct RunConfig {
  std::string M = "6";
  double alpha0 = 1.0;
  std::size_t D = 64;
  int N = 8;
  std::string regularizer = "weighted-l1";
  std::string out;
  bool trace = false;
  std::string dump_operator;
  double tol = kDefaultCertificateTol;
  long max_iter = 200000;
  std::string metric = "diagonal";
  bool timing = false;
};

struct DenoiseConfig {
  std::string input;
  double lambda0 = 1.0;
  int N = 12;
  std::string out;
  bool timing = false;
};

struct ReportConfig {
  std::string input;
};

/// "threshold" selects M = 3 + 2 sqrt 2 exactly; otherwise a decimal number.
inline double parse_M(const std::string& s) {
  if (s == "threshold") return kDivergenceThreshold;
  try {
    return parse_double(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("invalid M '" + s + "'");
  }
}

inline CexParams checked_params(double M, double alpha0) {
  try {
    return derive_constants(M, alpha0).params;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------

inline int cmd_verify(const VerifyConfig& cfg, std::ostream& out) {
  if (cfg.M.empty()) throw ConfigError("verify: no M given");
  if (cfg.n_max < 0) throw ConfigError("verify: --n-max must be >= 0");
  if (cfg.J_max < static_cast<std::size_t>(cfg.n_max) + 4) throw ConfigError("verify: --J-max must be >= n-max + 4");
  std::vector<CexParams> params;
  for (const auto& m : cfg.M) params.push_back(checked_params(parse_M(m), cfg.alpha0));

  const std::size_t per_M = static_cast<std::size_t>(cfg.n_max) + 1;
  const std::size_t cells = params.size() * per_M;
  std::vector<ClaimReport> reports(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++)
      reports[i] = verify_claim(static_cast<int>(i % per_M), params[i / per_M], cfg.J_max);
  };
  unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, cells));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
  }

  int unexpected = 0;
  json all = json::array();
  std::string csv = "M,alpha0," + std::string(kClaimCsvHeader) + "\r\n";
  for (std::size_t mi = 0; mi < params.size(); ++mi) {
    const CexParams& p = params[mi];
    const bool guaranteed = divergence_guaranteed(p.M);
    std::size_t passed = 0;
    double min_margin = 1.0;
    std::string first_reason;
    for (std::size_t k = 0; k < per_M; ++k) {
      const ClaimReport& r = reports[mi * per_M + k];
      all.push_back(r);
      csv += format_double(p.M) + ',' + format_double(p.alpha0) + ',' + claim_csv_row(r) + "\r\n";
      min_margin = std::min(min_margin, r.margin);
      if (r.pass) {
        ++passed;
      } else {
        if (first_reason.empty()) first_reason = r.reason;
        if (guaranteed) ++unexpected;
      }
    }
    out << "M=" << format_double(p.M) << " alpha0=" << format_double(p.alpha0) << ": " << passed << "/" << per_M
        << " claims hold, min margin " << format_double(min_margin)
        << (guaranteed ? " (divergence guaranteed)" : " (below threshold, failures expected)") << "\n";
    if (!first_reason.empty()) out << "  first failure: " << first_reason << "\n";
  }
  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    atomic_write(dir / "claims.json", all.dump(1) + "\n");
    atomic_write(dir / "claims.csv", csv);
  }
  if (unexpected) out << unexpected << " unexpected claim failure(s)\n";
  return unexpected ? kExitScientific : kExitOk;
}

// ---------------------------------------------------------------------------

inline json run_diagnostics(const RunReport& r) {
  double sup_l2 = 0.0, sup_X = 0.0;
  for (const auto& s : r.steps) {
    sup_l2 = std::max(sup_l2, s.sigma_norm_l2);
    sup_X = std::max(sup_X, s.sigma_norm_X);
  }
  json d{{"sup_sigma_norm_l2", sup_l2},
         {"sup_sigma_norm_X", sup_X},
         {"final_u_norm_l2", r.steps.empty() ? 0.0 : r.steps.back().u_norm_l2},
         {"residual_monotone", r.steps.size() < 2 || check_monotonicity(r)}};
  if (r.config.known_inf && !r.steps.empty()) d["minimizing_gap"] = check_minimizing(r, *r.config.known_inf);
  return d;
}

inline json timing_json(const RunReport& r) {
  json steps = json::array();
  double total = 0.0;
  for (const auto& s : r.steps) {
    steps.push_back({{"n", s.n}, {"wall_time_ms", s.wall_time * 1e3}});
    total += s.wall_time;
  }
  return json{{"steps", steps}, {"total_ms", total * 1e3}};
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out) {
  if (cfg.N < 1) throw ConfigError("run: --N must be >= 1");
  if (cfg.D < 3) throw ConfigError("run: --D must be >= 3");
  if (!(cfg.tol > 0.0)) throw ConfigError("run: --tol must be > 0");
  if (cfg.max_iter < 1) throw ConfigError("run: --max-iter must be >= 1");
  const CexParams p = checked_params(parse_M(cfg.M), cfg.alpha0);
  RegularizerKind kind;
  try {
    kind = regularizer_kind_from_string(cfg.regularizer);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (kind == RegularizerKind::TV1D) throw ConfigError("run: tv-1d is only available through denoise");
  const bool compare = kind == RegularizerKind::WeightedL1;
  if (compare && static_cast<std::size_t>(cfg.N) + 2 > cfg.D)
    throw ConfigError("run: weighted-l1 comparison needs N + 2 <= D");

  const LinearOp A = build_counterexample_operator(p, cfg.D);
  MultiscaleConfig mc;
  mc.lambda0 = p.alpha0;
  mc.growth = p.M;
  mc.steps = cfg.N;
  mc.regularizer = Regularizer(kind);
  mc.dim = cfg.D;
  mc.known_inf = 0.0;
  mc.solver_opts.tol = cfg.tol;
  mc.solver_opts.max_iter = cfg.max_iter;
  mc.solver_opts.record_trace = cfg.trace;
  if (cfg.metric == "diagonal") {
    mc.solver_opts.metric = StepMetric::Diagonal;
  } else if (cfg.metric == "scalar") {
    mc.solver_opts.metric = StepMetric::Scalar;
  } else {
    throw ConfigError("run: --metric must be diagonal or scalar");
  }
  try {
    validate(mc, A);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("run: ") + e.what());
  }

  const std::filesystem::path dir(cfg.out);
  if (!cfg.dump_operator.empty()) atomic_write(cfg.dump_operator, operator_csv(A));

  const RunReport rep = run_multiscale(A, A.column(1), mc);

  json comparison = json::array();
  std::string cmp_csv = "n,l1_distance,sigma_norm_X,analytic_sigma_norm_X,residual_H,residual_H_closed_form\r\n";
  double max_dev = 0.0;
  if (compare) {
    for (const auto& s : rep.steps) {
      const double dist = norm_l1(rep.partial_sums[static_cast<std::size_t>(s.n)] - analytic_sigma(s.n, p, cfg.D));
      const double ana_X = analytic_sigma_norm_X(s.n, p);
      const double ana_res = std::sqrt(residual_sq_closed_form(s.n, p));
      max_dev = std::max(max_dev, dist);
      comparison.push_back({{"n", s.n},
                            {"l1_distance", dist},
                            {"sigma_norm_X", s.sigma_norm_X},
                            {"analytic_sigma_norm_X", ana_X},
                            {"residual_H", s.residual_H},
                            {"residual_H_closed_form", ana_res}});
      cmp_csv += std::to_string(s.n) + ',' + format_double(dist) + ',' + format_double(s.sigma_norm_X) + ',' +
                 format_double(ana_X) + ',' + format_double(s.residual_H) + ',' + format_double(ana_res) + "\r\n";
    }
  }

  json doc = report_to_json(rep, cfg.timing);
  doc["params"] = p;
  doc["diagnostics"] = run_diagnostics(rep);
  if (compare) {
    doc["comparison"] = comparison;
    doc["max_l1_deviation"] = max_dev;
  }
  if (!cfg.out.empty()) {
    atomic_write(dir / "run_report.json", doc.dump(1) + "\n");
    atomic_write(dir / "steps.csv", steps_csv(rep, cfg.timing));
    if (compare) atomic_write(dir / "comparison.csv", cmp_csv);
    atomic_write(dir / "timing.json", timing_json(rep).dump(1) + "\n");
    if (cfg.trace)
      for (std::size_t k = 0; k < rep.traces.size(); ++k)
        atomic_write(dir / ("trace_step" + std::to_string(k) + ".csv"), trace_csv(rep.traces[k]));
  }

  out << "n  lambda_n  sigma_norm_X  sigma_norm_l2  residual_H  certified\n";
  for (const auto& s : rep.steps)
    out << s.n << "  " << format_double(s.lambda_n) << "  " << format_double(s.sigma_norm_X) << "  "
        << format_double(s.sigma_norm_l2) << "  " << format_double(s.residual_H) << "  "
        << (s.certified ? "yes" : "NO") << "\n";
  if (compare) out << "max l1 distance to analytic sigma_n: " << format_double(max_dev) << "\n";
  out << "sup ||sigma_n||_2 = " << format_double(doc["diagnostics"]["sup_sigma_norm_l2"].get<double>()) << "\n";

  if (!rep.all_certified()) {
    out << "run aborted: " << rep.early_stop_reason << "\n";
    return kExitScientific;
  }
  if (compare && divergence_guaranteed(p.M) && max_dev > 1e-5) {
    out << "numeric sequence departs from the analytic one\n";
    return kExitScientific;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int cmd_denoise(const DenoiseConfig& cfg, std::ostream& out) {
  if (cfg.N < 1) throw ConfigError("denoise: --N must be >= 1");
  if (!(cfg.lambda0 > 0.0)) throw ConfigError("denoise: --lambda0 must be > 0");
  SeqVector f;
  try {
    f = read_signal_csv(std::filesystem::path(cfg.input));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("denoise: ") + e.what());
  }
  const RunReport rep = tnv_denoise_1d(f, cfg.lambda0, cfg.N);
  json doc = report_to_json(rep, cfg.timing);
  doc["diagnostics"] = run_diagnostics(rep);
  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    atomic_write(dir / "run_report.json", doc.dump(1) + "\n");
    atomic_write(dir / "steps.csv", steps_csv(rep, cfg.timing));
    atomic_write(dir / "reconstruction.csv", reconstruction_csv(f, rep));
    atomic_write(dir / "timing.json", timing_json(rep).dump(1) + "\n");
  }
  const double fn = norm_l2(f);
  out << "n  lambda_n  residual_H  residual/||f||  certified\n";
  for (const auto& s : rep.steps)
    out << s.n << "  " << format_double(s.lambda_n) << "  " << format_double(s.residual_H) << "  "
        << format_double(fn > 0.0 ? s.residual_H / fn : 0.0) << "  " << (s.certified ? "yes" : "NO") << "\n";
  if (!rep.all_certified()) {
    out << "run aborted: " << rep.early_stop_reason << "\n";
    return kExitScientific;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int cmd_report(const ReportConfig& cfg, std::ostream& out) {
  RunReport rep;
  try {
    rep = report_from_json(json::parse(read_file(cfg.input)));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  if (rep.steps.empty()) throw ConfigError("report: no steps in " + cfg.input);
  out << "regularizer " << rep.config.regularizer.name() << ", lambda0 " << format_double(rep.config.lambda0)
      << ", growth " << format_double(rep.config.growth) << "\n";
  out << std::string(kStepsCsvHeader) << "\n";
  for (const auto& s : rep.steps)
    out << s.n << ',' << format_double(s.lambda_n) << ',' << format_double(s.u_norm_F) << ','
        << format_double(s.sigma_norm_X) << ',' << format_double(s.residual_H) << ','
        << format_double(s.certificate.dual_norm_value) << ',' << format_double(s.certificate.gap) << ','
        << csv_bool(s.certified) << ',' << format_double(s.wall_time * 1e3) << "\n";
  const bool monotone = check_monotonicity(rep);
  const bool certified = rep.all_certified();
  out << "residual non-increasing: " << (monotone ? "yes" : "NO") << "\n";
  out << "all steps certified: " << (certified ? "yes" : "NO") << "\n";
  if (rep.config.known_inf) out << "minimizing gap: " << format_double(check_minimizing(rep, *rep.config.known_inf)) << "\n";
  return monotone && certified ? kExitOk : kExitScientific;
}

// ---------------------------------------------------------------------------

struct ExperimentConfig {
  VerifyConfig verify;
  RunConfig run;
  DenoiseConfig denoise;
  ReportConfig report;
};

/// Registers all subcommands and options on `app`, bound to `cfg`.
inline void build_app(CLI::App& app, ExperimentConfig& cfg) {
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_config("--config", "", "Read options from a TOML/INI file; command-line flags take precedence");
  app.add_flag("--print-config", "Print the effective configuration in canonical form and exit")
      ->configurable(false);

  auto* verify = app.add_subcommand("verify", "Check the pairing claim A_{j,n1} <= A_{n1,n1} = 1/(2 lambda_n)");
  verify->add_option("--M", cfg.verify.M, "Growth factors (comma separated; 'threshold' = 3+2*sqrt(2))")
      ->delimiter(',')
      ->default_str("6");
  verify->add_option("--alpha0", cfg.verify.alpha0, "Initial weight lambda_0")->capture_default_str();
  verify->add_option("--n-max", cfg.verify.n_max, "Largest scale index n")->capture_default_str();
  verify->add_option("--J-max", cfg.verify.J_max, "Explicitly evaluated indices j")->capture_default_str();
  verify->add_option("--out", cfg.verify.out, "Output directory for claims.json / claims.csv");
  verify->add_option("--threads", cfg.verify.threads, "Worker threads (0 = hardware)")->capture_default_str();

  auto* run = app.add_subcommand("run", "Multiscale decomposition of Lambda(e_1) for the counterexample operator");
  run->add_option("--M", cfg.run.M, "Growth factor M ('threshold' = 3+2*sqrt(2))")->capture_default_str();
  run->add_option("--alpha0", cfg.run.alpha0, "Initial weight lambda_0")->capture_default_str();
  run->add_option("--D", cfg.run.D, "Truncation dimension")->capture_default_str();
  run->add_option("--N", cfg.run.N, "Index of the last scale")->capture_default_str();
  run->add_option("--regularizer", cfg.run.regularizer, "weighted-l1 | hilbert-norm")->capture_default_str();
  run->add_option("--out", cfg.run.out, "Output directory");
  run->add_flag("--trace", cfg.run.trace, "Write per-step solver traces");
  run->add_option("--dump-operator", cfg.run.dump_operator, "Write the operator as a row-major CSV matrix");
  run->add_option("--tol", cfg.run.tol, "Certificate tolerance")->capture_default_str();
  run->add_option("--max-iter", cfg.run.max_iter, "Iteration cap per step")->capture_default_str();
  run->add_option("--metric", cfg.run.metric, "Step metric: diagonal | scalar")->capture_default_str();
  run->add_flag("--timing", cfg.run.timing, "Embed wall times in the main outputs");

  auto* denoise = app.add_subcommand("denoise", "Multiscale TV decomposition of a 1D signal");
  denoise->add_option("input", cfg.denoise.input, "Single-column CSV signal")->required();
  denoise->add_option("--lambda0", cfg.denoise.lambda0, "Initial weight lambda_0")->capture_default_str();
  denoise->add_option("--N", cfg.denoise.N, "Index of the last scale")->capture_default_str();
  denoise->add_option("--out", cfg.denoise.out, "Output directory");
  denoise->add_flag("--timing", cfg.denoise.timing, "Embed wall times in the main outputs");

  auto* report = app.add_subcommand("report", "Summarize a run_report.json");
  report->add_option("input", cfg.report.input, "Path to run_report.json")->required();
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiscale decomposition laboratory", "mscale"};
  ExperimentConfig cfg;
  build_app(app, cfg);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }
  if (app.get_option("--print-config")->count() > 0) {
    out << app.config_to_str(true, false);
    return kExitOk;
  }
  try {
    if (app.got_subcommand("verify")) return cmd_verify(cfg.verify, out);
    if (app.got_subcommand("run")) return cmd_run(cfg.run, out);
    if (app.got_subcommand("denoise")) return cmd_denoise(cfg.denoise, out);
    if (app.got_subcommand("report")) return cmd_report(cfg.report, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitScientific;
  }
  return kExitUsage;
}

}  // namespace mscale::cli
