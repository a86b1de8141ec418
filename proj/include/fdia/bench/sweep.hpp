#pragma once

// The kappa/N sweep: for every grid point and repetition, fresh train and
// test trials are generated, each detector is trained on the train samples
// and scored on the test samples, and metrics are aggregated per point.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fdia/attackgen.hpp"
#include "fdia/bench/metrics.hpp"
#include "fdia/dataset.hpp"
#include "fdia/dc_grid.hpp"
#include "fdia/errors.hpp"
#include "fdia/learners/online.hpp"
#include "fdia/matpower_io.hpp"
#include "fdia/model.hpp"

namespace fdia {

inline const std::vector<std::string>& known_detectors() {
  static const std::vector<std::string> names = {"sve",     "perceptron", "knn", "svm-linear", "svm-gaussian",
                                                 "slr",     "s3vm",       "adaboost", "mkl",  "op",
                                                 "opwm",    "online-svm", "online-slr"};
  return names;
}

struct SweepConfig {
  BuiltinCase system = BuiltinCase::ieee9;
  std::vector<std::string> detectors = {"sve"};
  std::vector<double> grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int repetitions = 50;
  int train_trials = 50;
  int test_trials = 50;
  double noise_scale = 0.01;
  std::uint64_t seed = 42;
  double confidence = 0.95;
  unsigned threads = 0;  // 0: BENCH_THREADS if set, else hardware concurrency

  double perceptron_gamma = 0.1;
  int perceptron_epochs = 100;
  double s3vm_c1 = 1.0;
  double s3vm_c2 = 1.0;
  std::vector<double> slr_omegas = {1e-3, 1e-2, 1e-1, 1.0};
  OnlineHyperparameters online{};
  int cv_folds = 5;
};

/// "a:b:n" -> n evenly spaced points from a to b inclusive.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw ConfigError("grid must have the form a:b:n, got '" + text + "'");
  double a = 0.0, b = 0.0;
  long n = 0;
  try {
    std::size_t used = 0;
    a = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("a");
    b = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("b");
    n = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("n");
  } catch (const std::exception&) {
    throw ConfigError("grid must have the form a:b:n, got '" + text + "'");
  }
  if (n < 1) throw ConfigError("grid needs at least one point");
  if (n == 1) return {b};
  std::vector<double> g(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = b;
  return g;
}

inline void validate_sweep_config(const SweepConfig& c) {
  if (c.detectors.empty()) throw ConfigError("no detectors requested");
  for (const auto& d : c.detectors) {
    if (std::find(known_detectors().begin(), known_detectors().end(), d) == known_detectors().end()) {
      throw ConfigError("unknown detector '" + d + "'");
    }
  }
  if (c.grid.empty()) throw ConfigError("empty kappa/N grid");
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    if (!(c.grid[i] > 0.0 && c.grid[i] <= 1.0)) throw ConfigError("kappa/N grid points must lie in (0,1]");
    if (i > 0 && !(c.grid[i] > c.grid[i - 1])) throw ConfigError("kappa/N grid must be strictly increasing");
  }
  if (c.repetitions < 1) throw ConfigError("repetitions must be positive");
  if (c.train_trials < 1 || c.test_trials < 1) throw ConfigError("trial counts must be positive");
  if (!(c.noise_scale > 0.0)) throw ConfigError("noise scale must be positive");
  if (!(c.confidence > 0.0 && c.confidence < 1.0)) throw ConfigError("confidence must lie in (0,1)");
  if (c.cv_folds < 2) throw ConfigError("cv folds must be at least 2");
  if (c.slr_omegas.empty()) throw ConfigError("no SLR omega candidates");
  for (double w : c.slr_omegas) {
    if (!(w > 0.0 && w <= 1.0)) throw ConfigError("SLR omega candidates must lie in (0,1]");
  }
}

/// Attack support size for a grid point.
inline Index kappa_for(double kappa_over_n, Index n) {
  return std::clamp<Index>(static_cast<Index>(std::ceil(kappa_over_n * static_cast<double>(n) - 1e-9)), 1, n);
}

inline AttackKind attack_kind_for(const DcModel& model, Index kappa) {
  return kappa >= model.kappa_star() ? AttackKind::unobservable : AttackKind::observable;
}

// --- seeds ---------------------------------------------------------------

enum class TrialPool : std::uint64_t { train = 0, test = 1 };

/// Trial seed = master XOR (cell << 21 | pool << 20 | trial); distinct
/// (cell, pool, trial) triples give distinct seeds.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t cell, TrialPool pool, std::size_t trial) {
  if (trial >= (std::size_t{1} << 20)) throw ConfigError("too many trials per cell");
  const std::uint64_t index = (static_cast<std::uint64_t>(cell) << 21) | (static_cast<std::uint64_t>(pool) << 20) |
                              static_cast<std::uint64_t>(trial);
  return derive_seed(master, index);
}

/// Seed for harness-side randomness of a cell (stream shuffling).
inline std::uint64_t cell_seed(std::uint64_t master, std::size_t cell) {
  return splitmix64(derive_seed(master, (static_cast<std::uint64_t>(cell) << 21) | 0xFFFFFu));
}

// --- results -------------------------------------------------------------

struct MetricSummary {
  double mean = std::nan("");  // NaN when undefined in every repetition
  double std = std::nan("");
  std::size_t defined = 0;  // repetitions where the metric was defined
};

struct SweepPoint {
  double kappa_over_n = 0.0;
  Index kappa = 0;
  AttackKind kind = AttackKind::observable;
  std::array<MetricSummary, kAllMetrics.size()> metrics{};
  Confusion pooled;  // summed over repetitions

  const MetricSummary& get(Metric m) const { return metrics[static_cast<std::size_t>(m)]; }
};

struct DetectorSeries {
  std::string detector;
  std::vector<SweepPoint> points;
  std::size_t undefined_metrics = 0;  // (point, rep, metric) triples excluded from the means
};

struct PointHyperparameters {
  double svm_linear_c = 1.0;
  double svm_gaussian_c = 1.0;
  double svm_gaussian_sigma = 1.0;
  double slr_omega = 1.0;
};

struct SweepResult {
  std::string system;
  SweepConfig config;
  std::vector<double> grid;
  std::vector<Index> kappas;
  int repetitions = 0;
  std::uint64_t seed = 0;
  std::vector<DetectorSeries> series;
  std::vector<PointHyperparameters> hyperparameters;  // per grid point
  std::vector<double> sve_trial_detection_rate;        // per grid point, over all test trials

  const DetectorSeries& detector(const std::string& name) const {
    for (const auto& s : series) {
      if (s.detector == name) return s;
    }
    throw ContractError("detector '" + name + "' not in sweep result");
  }
};

inline unsigned resolve_threads(unsigned requested) {
  unsigned n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BENCH_THREADS")) {
      char* end = nullptr;
      const long cap = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
  }
  return std::max(1u, n);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception (by index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

inline std::vector<Trial> generate_pool(const DcModel& model, Index kappa, AttackKind kind, std::uint64_t master,
                                        std::size_t cell, TrialPool pool, int count) {
  std::vector<Trial> trials;
  trials.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    trials.push_back(generate_trial(model, {kind, kappa, trial_seed(master, cell, pool, static_cast<std::size_t>(t))}));
  }
  return trials;
}

inline double select_slr_omega(const LabeledDataset& train, const std::vector<double>& omegas, int folds) {
  double best_omega = omegas.front();
  double best_acc = -1.0;
  for (double omega : omegas) {
    std::size_t correct = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < train.size(); ++i) (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? te : tr).push_back(i);
      const auto fit = train.subset(tr);
      if (!fit.has_both_classes()) {
        const int only = fit.labels.front();
        for (auto i : te) correct += train.labels[i] == only;
        continue;
      }
      const auto m = train_slr(fit, omega);
      for (auto i : te) correct += m.predict(train.samples[i]) == train.labels[i];
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(train.size());
    if (acc > best_acc) {
      best_acc = acc;
      best_omega = omega;
    }
  }
  return best_omega;
}

inline std::vector<int> predict_online(OnlineAlgorithm algorithm, const LabeledDataset& train,
                                       const LabeledDataset& test, std::uint64_t shuffle_seed,
                                       const OnlineHyperparameters& hp) {
  const auto stream = shuffled(train, shuffle_seed);
  auto state = make_online_state(algorithm, stream.dimension(), hp);
  for (std::size_t i = 0; i < stream.size(); ++i) online_step(state, stream.samples[i], stream.labels[i], hp.independence_tolerance);
  std::vector<int> out;
  out.reserve(test.size());
  for (const auto& s : test.samples) out.push_back(online_predict(state, s));
  return out;
}

// Predictions of one trained detector on the test samples. A training set
// with a single class yields a constant classifier for that class.
inline std::vector<int> run_detector(const std::string& name, const SweepConfig& config,
                                     const PointHyperparameters& hyper, const LabeledDataset& train,
                                     const LabeledDataset& test, std::uint64_t shuffle_seed) {
  const bool needs_both = name != "perceptron" && name != "knn" && name != "op" && name != "opwm" &&
                          name != "online-svm" && name != "online-slr";
  if (needs_both && !train.has_both_classes()) return std::vector<int>(test.size(), train.labels.front());

  if (name == "perceptron") return predict_all(train_perceptron(train, config.perceptron_gamma, config.perceptron_epochs), test.samples);
  if (name == "knn") return predict_all(train_knn(train), test.samples);
  if (name == "svm-linear") return predict_all(train_svm(train, hyper.svm_linear_c, KernelDescriptor::linear()), test.samples);
  if (name == "svm-gaussian") {
    return predict_all(train_svm(train, hyper.svm_gaussian_c, KernelDescriptor::gaussian(hyper.svm_gaussian_sigma)),
                       test.samples);
  }
  if (name == "slr") return predict_all(train_slr(train, hyper.slr_omega), test.samples);
  if (name == "s3vm") return predict_all(train_s3vm(train, test.samples, config.s3vm_c1, config.s3vm_c2), test.samples);
  if (name == "adaboost") return predict_all(train_adaboost_loo(train), test.samples);
  if (name == "mkl") {
    const std::vector<KernelDescriptor> kernels = {KernelDescriptor::linear(),
                                                   KernelDescriptor::gaussian(hyper.svm_gaussian_sigma)};
    return predict_all(train_mkl(train, kernels, hyper.svm_gaussian_c), test.samples);
  }
  return predict_online(online_algorithm_from_name(name), train, test, shuffle_seed, config.online);
}

inline MetricSummary summarize(const std::vector<std::optional<double>>& values) {
  MetricSummary s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++s.defined;
    }
  }
  if (s.defined == 0) return s;
  s.mean = sum / static_cast<double>(s.defined);
  double sq = 0.0;
  for (const auto& v : values) {
    if (v) sq += (*v - s.mean) * (*v - s.mean);
  }
  s.std = s.defined > 1 ? std::sqrt(sq / static_cast<double>(s.defined - 1)) : 0.0;
  return s;
}

}  // namespace detail

inline SweepResult run_sweep(const SweepConfig& config) {
  validate_sweep_config(config);
  const DcModel model = build_dc_model(load_builtin(config.system), config.noise_scale);
  const Index n = model.num_measurements();
  const auto groups = static_cast<std::size_t>(n);
  const std::size_t points = config.grid.size();
  const auto reps = static_cast<std::size_t>(config.repetitions);
  const unsigned threads = resolve_threads(config.threads);

  SweepResult result;
  result.system = std::string(builtin_name(config.system));
  result.config = config;
  result.grid = config.grid;
  result.repetitions = config.repetitions;
  result.seed = config.seed;
  for (double g : config.grid) result.kappas.push_back(kappa_for(g, n));

  auto wants = [&](const char* d) {
    return std::find(config.detectors.begin(), config.detectors.end(), d) != config.detectors.end();
  };

  // Hyperparameters are selected once per grid point on the first repetition's training set.
  result.hyperparameters.assign(points, {});
  const bool need_linear = wants("svm-linear");
  const bool need_gaussian = wants("svm-gaussian") || wants("mkl");
  const bool need_slr = wants("slr");
  if (need_linear || need_gaussian || need_slr) {
    parallel_for(points, threads, [&](std::size_t p) {
      const Index kappa = result.kappas[p];
      const auto kind = attack_kind_for(model, kappa);
      const auto train = assemble_dataset(
          detail::generate_pool(model, kappa, kind, config.seed, p * reps, TrialPool::train, config.train_trials), groups);
      auto& h = result.hyperparameters[p];
      if (!train.has_both_classes()) return;
      GridSearchOptions gs;
      gs.folds = config.cv_folds;
      if (need_linear) h.svm_linear_c = grid_search_svm(train, KernelKind::linear, gs).C;
      if (need_gaussian) {
        const auto best = grid_search_svm(train, KernelKind::gaussian, gs);
        h.svm_gaussian_c = best.C;
        h.svm_gaussian_sigma = best.sigma;
      }
      if (need_slr) h.slr_omega = detail::select_slr_omega(train, config.slr_omegas, config.cv_folds);
    });
  }

  // cells[p * reps + r][detector] -> confusion
  const std::size_t cells = points * reps;
  std::vector<std::vector<Confusion>> confusions(cells, std::vector<Confusion>(config.detectors.size()));
  std::vector<std::pair<std::size_t, std::size_t>> sve_flags(cells, {0, 0});
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t p = cell / reps;
    const Index kappa = result.kappas[p];
    const auto kind = attack_kind_for(model, kappa);
    const auto train_trials =
        detail::generate_pool(model, kappa, kind, config.seed, cell, TrialPool::train, config.train_trials);
    const auto test_trials = detail::generate_pool(model, kappa, kind, config.seed, cell, TrialPool::test, config.test_trials);
    const auto train = assemble_dataset(train_trials, groups);
    const auto test = assemble_dataset(test_trials, groups);
    for (const auto& t : test_trials) {
      sve_flags[cell].first += residual_detect(model, t.z_tilde, config.confidence).attacked_flag;
      ++sve_flags[cell].second;
    }
    for (std::size_t d = 0; d < config.detectors.size(); ++d) {
      const auto& name = config.detectors[d];
      if (name == "sve") {
        Confusion c;
        for (const auto& t : test_trials) c += confusion(sve_as_classifier(model, t, config.confidence), t.labels);
        confusions[cell][d] = c;
      } else {
        const auto predicted =
            detail::run_detector(name, config, result.hyperparameters[p], train, test, cell_seed(config.seed, cell));
        confusions[cell][d] = confusion(predicted, test.labels);
      }
    }
  });

  // Fixed-order reduction.
  for (std::size_t p = 0; p < points; ++p) {
    std::size_t flagged = 0, total = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      flagged += sve_flags[p * reps + r].first;
      total += sve_flags[p * reps + r].second;
    }
    result.sve_trial_detection_rate.push_back(static_cast<double>(flagged) / static_cast<double>(total));
  }
  for (std::size_t d = 0; d < config.detectors.size(); ++d) {
    DetectorSeries series;
    series.detector = config.detectors[d];
    for (std::size_t p = 0; p < points; ++p) {
      SweepPoint point;
      point.kappa_over_n = config.grid[p];
      point.kappa = result.kappas[p];
      point.kind = attack_kind_for(model, point.kappa);
      std::vector<MetricsReport> reports;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& c = confusions[p * reps + r][d];
        point.pooled += c;
        reports.push_back(metrics_from(c));
      }
      for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
        std::vector<std::optional<double>> values;
        for (const auto& rep : reports) values.push_back(rep.get(kAllMetrics[m]));
        point.metrics[m] = detail::summarize(values);
        series.undefined_metrics += reps - point.metrics[m].defined;
      }
      series.points.push_back(point);
    }
    result.series.push_back(std::move(series));
  }
  return result;
}

}  // namespace fdia
