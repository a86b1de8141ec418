#pragma once

// Sweep results as CSV (one row per grid point and metric) and a JSON-lines
// manifest holding the configuration needed to reproduce them.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"  // nlohmann::json, vendored

#include "fdia/bench/sweep.hpp"
#include "fdia/errors.hpp"

namespace fdia {

inline constexpr const char* kResultsHeader = "system,detector,kappa_over_N,kappa,metric,mean,std,reps,seed";

namespace detail {
inline std::string full_precision(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_results_csv(std::ostream& os, const SweepResult& result) {
  os << kResultsHeader << '\n';
  for (const auto& series : result.series) {
    for (const auto& point : series.points) {
      for (auto m : kAllMetrics) {
        const auto& s = point.get(m);
        os << result.system << ',' << series.detector << ',' << detail::full_precision(point.kappa_over_n) << ','
           << point.kappa << ',' << metric_name(m) << ',' << detail::full_precision(s.mean) << ','
           << detail::full_precision(s.std) << ',' << result.repetitions << ',' << result.seed << '\n';
      }
    }
  }
}

struct ResultRow {
  std::string system;
  std::string detector;
  double kappa_over_n = 0.0;
  long long kappa = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int reps = 0;
  std::uint64_t seed = 0;
};

inline std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kResultsHeader) throw ParseError(1, "results: unexpected header");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  auto number = [&](const std::string& tok) {
    if (tok == "nan") return std::nan("");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ParseError(line_no, "results: bad number '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError(line_no, "results: bad number '" + tok + "'");
    return v;
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 9) throw ParseError(line_no, "results: expected 9 fields");
    ResultRow r;
    r.system = f[0];
    r.detector = f[1];
    r.kappa_over_n = number(f[2]);
    r.kappa = std::stoll(f[3]);
    r.metric = f[4];
    r.mean = number(f[5]);
    r.std = number(f[6]);
    r.reps = std::stoi(f[7]);
    r.seed = std::stoull(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::json config_to_json(const SweepConfig& c) {
  nlohmann::json j;
  j["system"] = std::string(builtin_name(c.system));
  j["detectors"] = c.detectors;
  j["grid"] = c.grid;
  j["repetitions"] = c.repetitions;
  j["train_trials"] = c.train_trials;
  j["test_trials"] = c.test_trials;
  j["noise_scale"] = c.noise_scale;
  j["seed"] = c.seed;
  j["confidence"] = c.confidence;
  j["perceptron_gamma"] = c.perceptron_gamma;
  j["perceptron_epochs"] = c.perceptron_epochs;
  j["s3vm_c1"] = c.s3vm_c1;
  j["s3vm_c2"] = c.s3vm_c2;
  j["slr_omegas"] = c.slr_omegas;
  j["online_svm_lambda"] = c.online.svm_lambda;
  j["online_slr_eta"] = c.online.slr_eta;
  j["online_slr_strength"] = c.online.slr_strength;
  j["cv_folds"] = c.cv_folds;
  return j;
}

inline SweepConfig config_from_json(const nlohmann::json& j) {
  try {
    SweepConfig c;
    const auto system = j.at("system").get<std::string>();
    const auto which = builtin_from_name(system);
    if (!which) throw ConfigError("unknown system '" + system + "'");
    c.system = *which;
    c.detectors = j.at("detectors").get<std::vector<std::string>>();
    c.grid = j.at("grid").get<std::vector<double>>();
    c.repetitions = j.at("repetitions").get<int>();
    c.train_trials = j.at("train_trials").get<int>();
    c.test_trials = j.at("test_trials").get<int>();
    c.noise_scale = j.at("noise_scale").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.confidence = j.at("confidence").get<double>();
    c.perceptron_gamma = j.at("perceptron_gamma").get<double>();
    c.perceptron_epochs = j.at("perceptron_epochs").get<int>();
    c.s3vm_c1 = j.at("s3vm_c1").get<double>();
    c.s3vm_c2 = j.at("s3vm_c2").get<double>();
    c.slr_omegas = j.at("slr_omegas").get<std::vector<double>>();
    c.online.svm_lambda = j.at("online_svm_lambda").get<double>();
    c.online.slr_eta = j.at("online_slr_eta").get<double>();
    c.online.slr_strength = j.at("online_slr_strength").get<double>();
    c.cv_folds = j.at("cv_folds").get<int>();
    validate_sweep_config(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

/// First line: {"type":"config",...}. Then one line per grid point with the
/// selected hyperparameters and the SVE trial-level detection rate, and one
/// line per detector with the count of undefined metric values.
inline void write_manifest(std::ostream& os, const SweepResult& result) {
  nlohmann::json head = config_to_json(result.config);
  head["type"] = "config";
  os << head.dump() << '\n';
  for (std::size_t p = 0; p < result.grid.size(); ++p) {
    const auto& h = result.hyperparameters[p];
    nlohmann::json j;
    j["type"] = "point";
    j["kappa_over_N"] = result.grid[p];
    j["kappa"] = result.kappas[p];
    j["svm_linear_c"] = h.svm_linear_c;
    j["svm_gaussian_c"] = h.svm_gaussian_c;
    j["svm_gaussian_sigma"] = h.svm_gaussian_sigma;
    j["slr_omega"] = h.slr_omega;
    j["sve_trial_detection_rate"] = result.sve_trial_detection_rate[p];
    os << j.dump() << '\n';
  }
  for (const auto& s : result.series) {
    nlohmann::json j;
    j["type"] = "detector";
    j["detector"] = s.detector;
    j["undefined_metric_values"] = s.undefined_metrics;
    os << j.dump() << '\n';
  }
}

inline SweepConfig read_manifest_config(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("manifest: ") + e.what());
    }
    if (j.value("type", "") == "config") return config_from_json(j);
  }
  throw ConfigError("manifest has no config record");
}

/// Writes `path` and `path + ".manifest.jsonl"`.
inline void export_results(const SweepResult& result, const std::string& path) {
  auto open = [](const std::string& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + p + "' for writing: " + std::strerror(errno));
    return f;
  };
  {
    auto f = open(path);
    write_results_csv(f, result);
    if (!f.flush()) throw std::runtime_error("write to '" + path + "' failed");
  }
  const std::string manifest = path + ".manifest.jsonl";
  auto f = open(manifest);
  write_manifest(f, result);
  if (!f.flush()) throw std::runtime_error("write to '" + manifest + "' failed");
}

}  // namespace fdia
