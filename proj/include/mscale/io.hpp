#pragma once

// JSON and CSV emission for reports, plus small file helpers.
// CSV follows RFC 4180 with '.' decimals and a mandatory header row; numbers
// use the shortest representation that round-trips, so repeated runs are
// byte-identical.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "mscale/counterexample.hpp"
#include "mscale/multiscale.hpp"
#include "mscale/operators.hpp"
#include "mscale/seqspace.hpp"
#include "mscale/varsolve.hpp"

namespace mscale {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const CexParams& p) {
  j = json{{"M", p.M}, {"alpha0", p.alpha0}, {"delta", p.delta}, {"b", p.b}, {"c0", p.c0}};
}

inline void to_json(json& j, const Certificate& c) {
  j = json{{"dual_norm_value", c.dual_norm_value},
           {"target", c.target},
           {"pairing_lhs", c.pairing_lhs},
           {"pairing_rhs", c.pairing_rhs},
           {"feasible", c.feasible},
           {"gap", c.gap},
           {"dual_slack", c.dual_slack},
           {"equality_attained", c.equality_attained},
           {"dual_argmax", c.dual_argmax}};
}

inline void from_json(const json& j, Certificate& c) {
  c.dual_norm_value = j.at("dual_norm_value").get<double>();
  c.target = j.at("target").get<double>();
  c.pairing_lhs = j.at("pairing_lhs").get<double>();
  c.pairing_rhs = j.at("pairing_rhs").get<double>();
  c.feasible = j.at("feasible").get<bool>();
  c.gap = j.at("gap").get<double>();
  c.dual_slack = j.value("dual_slack", 0.0);
  c.equality_attained = j.value("equality_attained", false);
  c.dual_argmax = j.value("dual_argmax", std::size_t{0});
}

inline void to_json(json& j, const SolveResult& r) {
  j = json{{"u", r.u.values()},
           {"objective", r.objective},
           {"iterations", r.iterations},
           {"converged", r.converged},
           {"certificate", r.certificate}};
}

inline void to_json(json& j, const StepRecord& s) {
  j = json{{"n", s.n},
           {"lambda_n", s.lambda_n},
           {"u_norm_F", s.u_norm_F},
           {"u_reg", s.u_reg},
           {"u_norm_l2", s.u_norm_l2},
           {"sigma_norm_X", s.sigma_norm_X},
           {"sigma_norm_l2", s.sigma_norm_l2},
           {"residual_H", s.residual_H},
           {"certificate", s.certificate},
           {"iterations", s.iterations},
           {"certified", s.certified},
           {"wall_time", s.wall_time}};
}

inline void from_json(const json& j, StepRecord& s) {
  s.n = j.at("n").get<int>();
  s.lambda_n = j.at("lambda_n").get<double>();
  s.u_norm_F = j.at("u_norm_F").get<double>();
  s.u_reg = j.value("u_reg", 0.0);
  s.u_norm_l2 = j.value("u_norm_l2", 0.0);
  s.sigma_norm_X = j.at("sigma_norm_X").get<double>();
  s.sigma_norm_l2 = j.value("sigma_norm_l2", 0.0);
  s.residual_H = j.at("residual_H").get<double>();
  s.certificate = j.at("certificate").get<Certificate>();
  s.iterations = j.value("iterations", 0L);
  s.certified = j.at("certified").get<bool>();
  s.wall_time = j.value("wall_time", 0.0);
}

inline json config_to_json(const MultiscaleConfig& c) {
  json j{{"lambda0", c.lambda0},
         {"growth", c.growth},
         {"steps", c.steps},
         {"regularizer", std::string(c.regularizer.name())},
         {"dim", c.dim},
         {"tol", c.solver_opts.tol},
         {"max_iter", c.solver_opts.max_iter},
         {"metric", c.solver_opts.metric == StepMetric::Diagonal ? "diagonal" : "scalar"}};
  j["known_inf"] = c.known_inf ? json(*c.known_inf) : json(nullptr);
  return j;
}

/// `with_timing = false` zeroes wall times so that reruns are byte-identical.
inline json report_to_json(const RunReport& r, bool with_timing = false) {
  json steps = json::array();
  for (StepRecord s : r.steps) {
    if (!with_timing) s.wall_time = 0.0;
    steps.push_back(s);
  }
  return json{{"config", config_to_json(r.config)},
              {"steps", steps},
              {"final_sigma", r.final_sigma.values()},
              {"inf_estimate", r.inf_estimate},
              {"early_stop_reason", r.early_stop_reason},
              {"all_certified", r.all_certified()}};
}

/// Inverse of report_to_json for the fields the report command inspects.
inline RunReport report_from_json(const json& j) {
  RunReport r;
  const json& c = j.at("config");
  r.config.lambda0 = c.at("lambda0").get<double>();
  r.config.growth = c.at("growth").get<double>();
  r.config.steps = c.at("steps").get<int>();
  r.config.regularizer = Regularizer(regularizer_kind_from_string(c.at("regularizer").get<std::string>()));
  r.config.dim = c.value("dim", std::size_t{0});
  if (c.contains("known_inf") && !c.at("known_inf").is_null()) r.config.known_inf = c.at("known_inf").get<double>();
  r.steps = j.at("steps").get<std::vector<StepRecord>>();
  r.final_sigma = SeqVector(j.at("final_sigma").get<std::vector<double>>());
  r.inf_estimate = j.at("inf_estimate").get<double>();
  r.early_stop_reason = j.value("early_stop_reason", std::string());
  return r;
}

inline void to_json(json& j, const ClaimReport& c) {
  j = json{{"M", c.M},
           {"alpha0", c.alpha0},
           {"n", c.n},
           {"n1", c.n1},
           {"lambda_n", c.lambda_n},
           {"A_values", c.A_values},
           {"max_index", c.max_index},
           {"A_n1n1", c.A_n1n1},
           {"target", c.target},
           {"tail_bound", c.tail_bound},
           {"quadratic", c.quadratic},
           {"margin", c.margin},
           {"strict", c.strict},
           {"pass", c.pass},
           {"reason", c.reason}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string csv_bool(bool b) { return b ? "true" : "false"; }

inline constexpr std::string_view kStepsCsvHeader =
    "n,lambda_n,u_norm_F,sigma_norm_X,residual_H,dual_norm_value,pairing_gap,certified,wall_time_ms";

inline std::string steps_csv(const RunReport& r, bool with_timing = false) {
  std::string out(kStepsCsvHeader);
  out += "\r\n";
  for (const auto& s : r.steps) {
    out += std::to_string(s.n) + ',' + format_double(s.lambda_n) + ',' + format_double(s.u_norm_F) + ',' +
           format_double(s.sigma_norm_X) + ',' + format_double(s.residual_H) + ',' +
           format_double(s.certificate.dual_norm_value) + ',' + format_double(s.certificate.gap) + ',' +
           csv_bool(s.certified) + ',' + format_double(with_timing ? s.wall_time * 1e3 : 0.0) + "\r\n";
  }
  return out;
}

inline constexpr std::string_view kClaimCsvHeader = "n,n1,lambda_n,A_max_index,A_n1n1,target,margin,pass";

inline std::string claim_csv_row(const ClaimReport& c) {
  return std::to_string(c.n) + ',' + std::to_string(c.n1) + ',' + format_double(c.lambda_n) + ',' +
         std::to_string(c.max_index) + ',' + format_double(c.A_n1n1) + ',' + format_double(c.target) + ',' +
         format_double(c.margin) + ',' + csv_bool(c.pass);
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "iteration,objective,dual_norm_value,pairing_gap\r\n";
  for (const auto& t : rows)
    out += std::to_string(t.iteration) + ',' + format_double(t.objective) + ',' + format_double(t.dual_norm_value) +
           ',' + format_double(t.pairing_gap) + "\r\n";
  return out;
}

/// Row-major dim_out x dim_in dump, one matrix row per line (no header).
inline std::string operator_csv(const LinearOp& A) {
  std::string out;
  for (std::size_t i = 1; i <= A.dim_out(); ++i) {
    for (std::size_t j = 1; j <= A.dim_in(); ++j) {
      if (j > 1) out += ',';
      out += format_double(A.entry(i, j));
    }
    out += "\r\n";
  }
  return out;
}

/// Columns: index, f, sigma_0 .. sigma_N.
inline std::string reconstruction_csv(const SeqVector& f, const RunReport& r) {
  std::string out = "index,f";
  for (std::size_t k = 0; k < r.partial_sums.size(); ++k) out += ",sigma_" + std::to_string(k);
  out += "\r\n";
  for (std::size_t i = 1; i <= f.dim(); ++i) {
    out += std::to_string(i) + ',' + format_double(f(i));
    for (const auto& s : r.partial_sums) out += ',' + format_double(s(i));
    out += "\r\n";
  }
  return out;
}

/// Reads a single-column CSV of finite reals. A non-numeric first line is
/// taken as the header.
inline SeqVector read_signal_csv(std::istream& in) {
  std::vector<double> vals;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view v = line;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    if (v.find(',') != std::string_view::npos)
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected a single column");
    if (v.find_first_not_of(" \t") == std::string_view::npos) {
      if (first) throw std::invalid_argument("line 1 is empty");
      continue;
    }
    try {
      vals.push_back(parse_double(v));
    } catch (const std::invalid_argument&) {
      if (!first) throw std::invalid_argument("line " + std::to_string(lineno) + ": not a finite real number");
    }
    first = false;
  }
  if (vals.empty()) throw std::invalid_argument("signal file contains no values");
  return SeqVector(std::move(vals));
}

inline SeqVector read_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return read_signal_csv(in);
}

/// Writes via a temporary file in the same directory and renames it into place.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mscale
