// bench: command-line front end for the FDIA detection benchmark.
//
//   bench sweep --system ieee57 --detectors svm-gaussian,slr,sve --reps 50 --grid 0.1:1.0:10 --out results.csv
//   bench sweep --manifest results.csv.manifest.jsonl --out again.csv
//   bench case dump --system ieee9
//   bench dataset --system ieee9 --kappa-over-n 0.5 --trials 50 --out data.csv
//   bench curve --algorithm opwm --system ieee9 --out curve.csv
//   bench train --detector svm-gaussian --out model.txt
//   bench model dump model.txt
//
// Exit status: 0 on success, 2 on a configuration error, 3 on any other failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fdia/fdia.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

fdia::BuiltinCase system_from(const std::string& name) {
  const auto which = fdia::builtin_from_name(name);
  if (!which) throw fdia::ConfigError("unknown system '" + name + "' (expected ieee9, ieee57 or ieee118)");
  return *which;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  return f;
}

// Train and test pools for one κ/N point, seeded like the first repetition of a sweep.
struct PointData {
  fdia::DcModel model;
  fdia::Index kappa = 0;
  fdia::LabeledDataset train;
  fdia::LabeledDataset test;
};

PointData point_data(const std::string& system, double noise, double kappa_over_n, int trials, std::uint64_t seed) {
  if (!(kappa_over_n > 0.0 && kappa_over_n <= 1.0)) throw fdia::ConfigError("--kappa-over-n must lie in (0,1]");
  if (trials < 1) throw fdia::ConfigError("--trials must be positive");
  if (!(noise > 0.0)) throw fdia::ConfigError("--noise must be positive");
  PointData d{fdia::build_dc_model(fdia::load_builtin(system_from(system)), noise)};
  const auto n = d.model.num_measurements();
  d.kappa = fdia::kappa_for(kappa_over_n, n);
  const auto kind = fdia::attack_kind_for(d.model, d.kappa);
  const auto groups = static_cast<std::size_t>(n);
  d.train = fdia::assemble_dataset(
      fdia::detail::generate_pool(d.model, d.kappa, kind, seed, 0, fdia::TrialPool::train, trials), groups);
  d.test = fdia::assemble_dataset(
      fdia::detail::generate_pool(d.model, d.kappa, kind, seed, 0, fdia::TrialPool::test, trials), groups);
  return d;
}

fdia::DetectorModel train_detector(const std::string& name, const fdia::LabeledDataset& train,
                                   const fdia::LabeledDataset& unlabeled) {
  using namespace fdia;
  const bool needs_both = name != "perceptron" && name != "knn";
  if (needs_both && !train.has_both_classes()) throw ContractError(name + ": training set has a single class");
  if (name == "perceptron") return train_perceptron(train);
  if (name == "knn") return train_knn(train);
  if (name == "svm-linear") return train_svm(train, grid_search_svm(train, KernelKind::linear).C, KernelDescriptor::linear());
  if (name == "svm-gaussian" || name == "mkl") {
    const auto best = grid_search_svm(train, KernelKind::gaussian);
    if (name == "svm-gaussian") return train_svm(train, best.C, KernelDescriptor::gaussian(best.sigma));
    return train_mkl(train, {KernelDescriptor::linear(), KernelDescriptor::gaussian(best.sigma)}, best.C);
  }
  if (name == "slr") return train_slr(train, detail::select_slr_omega(train, SweepConfig{}.slr_omegas, 5));
  if (name == "s3vm") return train_s3vm(train, unlabeled.samples, 1.0, 1.0);
  if (name == "adaboost") return train_adaboost_loo(train);
  throw ConfigError("'" + name + "' is not a batch detector");
}

void print_sweep_summary(const fdia::SweepResult& r) {
  for (const auto& s : r.series) {
    for (const auto& p : s.points) {
      std::printf("%-13s k/N=%.3f k=%3ld acc=%.4f rec=%.4f prec2=%.4f\n", s.detector.c_str(), p.kappa_over_n,
                  static_cast<long>(p.kappa), p.get(fdia::Metric::acc).mean, p.get(fdia::Metric::rec).mean,
                  p.get(fdia::Metric::prec2).mean);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"False data injection detection benchmark"};
  app.require_subcommand(1);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a kappa/N sweep and export CSV plus manifest");
  std::string system = "ieee9", detectors = "sve", grid = "0.1:1.0:10", out, manifest;
  int reps = 50, train_trials = 50, test_trials = 50;
  double noise = 0.01;
  std::uint64_t seed = 42;
  unsigned threads = 0;
  bool quiet = false;
  sweep->add_option("--system", system, "ieee9, ieee57 or ieee118");
  sweep->add_option("--detectors", detectors, "comma-separated detector names");
  sweep->add_option("--reps", reps, "repetitions per grid point");
  sweep->add_option("--grid", grid, "kappa/N grid as a:b:n");
  sweep->add_option("--noise", noise, "noise scale");
  sweep->add_option("--seed", seed, "master seed");
  sweep->add_option("--train-trials", train_trials);
  sweep->add_option("--test-trials", test_trials);
  sweep->add_option("--threads", threads, "worker threads (0: BENCH_THREADS or all cores)");
  sweep->add_option("--manifest", manifest, "rerun the configuration recorded in a manifest");
  sweep->add_option("--out", out, "results CSV path")->required();
  sweep->add_flag("--quiet", quiet);

  // case dump
  auto* case_cmd = app.add_subcommand("case", "Inspect builtin cases");
  case_cmd->require_subcommand(1);
  auto* case_dump = case_cmd->add_subcommand("dump", "Print the builtin case text verbatim");
  std::string case_system = "ieee9";
  case_dump->add_option("--system", case_system)->required();

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Export the train pool of one grid point as CSV");
  std::string ds_system = "ieee9", ds_out;
  double ds_point = 0.5, ds_noise = 0.01;
  int ds_trials = 50;
  std::uint64_t ds_seed = 42;
  dataset->add_option("--system", ds_system);
  dataset->add_option("--kappa-over-n", ds_point);
  dataset->add_option("--trials", ds_trials);
  dataset->add_option("--noise", ds_noise);
  dataset->add_option("--seed", ds_seed);
  dataset->add_option("--out", ds_out)->required();

  // curve
  auto* curve = app.add_subcommand("curve", "Learning curve of an online detector");
  std::string algorithm, cv_system = "ieee9", cv_out;
  double cv_point = 0.5, cv_noise = 0.01;
  int cv_trials = 50;
  std::size_t eval_every = 90;
  std::uint64_t cv_seed = 42;
  curve->add_option("--algorithm", algorithm, "op, opwm, online-svm or online-slr")->required();
  curve->add_option("--system", cv_system);
  curve->add_option("--kappa-over-n", cv_point);
  curve->add_option("--trials", cv_trials);
  curve->add_option("--noise", cv_noise);
  curve->add_option("--seed", cv_seed);
  curve->add_option("--eval-every", eval_every);
  curve->add_option("--out", cv_out, "CSV path (stdout when omitted)");

  // train
  auto* train = app.add_subcommand("train", "Train one batch detector and save it");
  std::string tr_detector, tr_system = "ieee9", tr_out;
  double tr_point = 0.5, tr_noise = 0.01;
  int tr_trials = 50;
  std::uint64_t tr_seed = 42;
  train->add_option("--detector", tr_detector)->required();
  train->add_option("--system", tr_system);
  train->add_option("--kappa-over-n", tr_point);
  train->add_option("--trials", tr_trials);
  train->add_option("--noise", tr_noise);
  train->add_option("--seed", tr_seed);
  train->add_option("--out", tr_out)->required();

  // model dump
  auto* model_cmd = app.add_subcommand("model", "Inspect saved models");
  model_cmd->require_subcommand(1);
  auto* model_dump = model_cmd->add_subcommand("dump", "Validate a saved model and print it");
  std::string model_path;
  model_dump->add_option("path", model_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sweep) {
      fdia::SweepConfig config;
      if (!manifest.empty()) {
        std::ifstream in(manifest);
        if (!in) throw fdia::ConfigError("cannot read manifest '" + manifest + "'");
        config = fdia::read_manifest_config(in);
      } else {
        config.system = system_from(system);
        config.detectors = split_list(detectors);
        config.grid = fdia::parse_grid(grid);
        config.repetitions = reps;
        config.train_trials = train_trials;
        config.test_trials = test_trials;
        config.noise_scale = noise;
        config.seed = seed;
      }
      config.threads = threads;
      fdia::validate_sweep_config(config);
      const auto result = fdia::run_sweep(config);
      fdia::export_results(result, out);
      if (!quiet) print_sweep_summary(result);
    } else if (*case_dump) {
      std::cout << fdia::builtin_text(system_from(case_system));
    } else if (*dataset) {
      const auto d = point_data(ds_system, ds_noise, ds_point, ds_trials, ds_seed);
      auto f = open_output(ds_out);
      fdia::write_dataset_csv(f, d.train);
    } else if (*curve) {
      const auto alg = fdia::online_algorithm_from_name(algorithm);
      if (eval_every < 1) throw fdia::ConfigError("--eval-every must be positive");
      const auto d = point_data(cv_system, cv_noise, cv_point, cv_trials, cv_seed);
      const auto r = fdia::run_stream(alg, fdia::shuffled(d.train, fdia::cell_seed(cv_seed, 0)), d.test, eval_every);
      if (cv_out.empty()) {
        fdia::write_learning_curve_csv(std::cout, r.curve);
      } else {
        auto f = open_output(cv_out);
        fdia::write_learning_curve_csv(f, r.curve);
      }
    } else if (*train) {
      const auto known = fdia::known_detectors();
      if (std::find(known.begin(), known.end(), tr_detector) == known.end())
        throw fdia::ConfigError("unknown detector '" + tr_detector + "'");
      const auto d = point_data(tr_system, tr_noise, tr_point, tr_trials, tr_seed);
      const auto m = train_detector(tr_detector, d.train, d.test);
      const auto s = fdia::score(fdia::predict_all(m, d.test.samples), d.test.labels);
      auto f = open_output(tr_out);
      fdia::save_model(f, m);
      std::printf("%s trained on %zu samples, test acc=%.4f\n", tr_detector.c_str(), d.train.size(), *s.report.acc);
    } else if (*model_dump) {
      std::ifstream in(model_path);
      if (!in) throw std::runtime_error("cannot read '" + model_path + "'");
      const auto m = fdia::load_model(in);
      fdia::save_model(std::cout, m);
    }
  } catch (const fdia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
