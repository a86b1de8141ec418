// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by number, e.g. `acceptance 1 3 7`.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fdia/fdia.hpp"
#include "oracles.hpp"

using namespace fdia;
using namespace fdia::testing;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<BuiltinCase> kSystems = {BuiltinCase::ieee9, BuiltinCase::ieee57, BuiltinCase::ieee118};

double trial_flag_rate(const DcModel& m, const std::vector<VectorXd>& zs) {
  std::size_t flagged = 0;
  for (const auto& z : zs) flagged += residual_detect(m, z).attacked_flag;
  return static_cast<double>(flagged) / static_cast<double>(zs.size());
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return rank;
}

// Spearman correlation over the points where y is defined.
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isnan(y[i])) {
      a.push_back(x[i]);
      b.push_back(y[i]);
    }
  }
  if (a.size() < 3) return std::nan("");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> series_means(const SweepResult& r, const std::string& detector, Metric m) {
  std::vector<double> out;
  for (const auto& p : r.detector(detector).points) out.push_back(p.get(m).mean);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// --- 1 ----------------------------------------------------------------------

Outcome kappa_star_anchor() {
  const auto m = build_dc_model(load_builtin(BuiltinCase::ieee9), 0.01);
  const Index n = m.num_measurements(), d = m.num_states();
  const double ratio = static_cast<double>(m.kappa_star()) / static_cast<double>(n);
  const bool ok = n == 18 && d == 9 && m.kappa_star() == n - d + 1 && m.kappa_star() == 10 &&
                  std::abs(ratio - 0.56) < 0.005;
  return {ok, fmt("N=%ld D=%ld kappa*=%ld kappa*/N=%.4f (stated 0.56)", static_cast<long>(n), static_cast<long>(d),
                  static_cast<long>(m.kappa_star()), ratio)};
}

// --- 2 ----------------------------------------------------------------------

Outcome annihilation() {
  Outcome out{true, ""};
  for (auto which : kSystems) {
    const auto m = build_dc_model(load_builtin(which), 0.01);
    double worst_rel = 0.0;
    std::vector<VectorXd> attacked, clean;
    for (std::uint64_t s = 0; s < 100; ++s) {
      // spread the supports over the whole unobservable range
      const Index n = m.num_measurements();
      const Index kappa = m.kappa_star() + static_cast<Index>(s) % (n - m.kappa_star() + 1);
      const auto t = generate_trial(m, {AttackKind::unobservable, kappa, 7000 + s});
      const double before = residual_detect(m, t.z).residual_rho;
      const double after = residual_detect(m, t.z_tilde).residual_rho;
      worst_rel = std::max(worst_rel, std::abs(after - before) / before);
      attacked.push_back(t.z_tilde);
      clean.push_back(t.z);
    }
    const double rate = trial_flag_rate(m, attacked);
    const double null_rate = trial_flag_rate(m, clean);
    const bool ok = worst_rel <= 1e-9 && std::abs(rate - null_rate) <= 0.03;
    out.pass = out.pass && ok;
    out.detail += fmt("%s: max rel drho=%.1e det=%.3f null=%.3f; ", std::string(builtin_name(which)).c_str(), worst_rel,
                      rate, null_rate);
  }
  return out;
}

// --- 3 ----------------------------------------------------------------------

Outcome chi2_calibration() {
  Outcome out{true, ""};
  for (auto which : kSystems) {
    const auto m = build_dc_model(load_builtin(which), 0.01);
    std::vector<VectorXd> zs;
    for (std::uint64_t s = 0; s < 1000; ++s) zs.push_back(generate_trial(m, {AttackKind::none, 0, 90000 + s}).z_tilde);
    const double rate = trial_flag_rate(m, zs);
    out.pass = out.pass && std::abs(rate - 0.05) <= 0.02;
    out.detail += fmt("%s=%.3f ", std::string(builtin_name(which)).c_str(), rate);
  }
  return out;
}

// --- 4 and 6 share one ieee9 sweep -------------------------------------------

const SweepResult& ieee9_sweep() {
  static const SweepResult r = [] {
    SweepConfig c;
    c.system = BuiltinCase::ieee9;
    c.detectors = {"sve", "svm-gaussian", "knn", "slr"};
    c.grid.clear();
    for (int k = 2; k <= 18; k += 2) c.grid.push_back(k / 18.0);
    c.repetitions = 20;
    c.seed = 20240601;
    return run_sweep(c);
  }();
  return r;
}

double mean_at(const SweepResult& r, const std::vector<double>& acc, std::initializer_list<int> kappas) {
  double s = 0.0;
  for (int k : kappas) {
    const auto it = std::find(r.kappas.begin(), r.kappas.end(), static_cast<Index>(k));
    s += acc[static_cast<std::size_t>(it - r.kappas.begin())];
  }
  return s / static_cast<double>(kappas.size());
}

Outcome svm_phase_transition() {
  const auto& r = ieee9_sweep();
  const auto acc = series_means(r, "svm-gaussian", Metric::acc);
  const double high = mean_at(r, acc, {12, 14});
  const double low = mean_at(r, acc, {4, 6});
  std::size_t jump_at = 1;
  for (std::size_t i = 1; i < acc.size(); ++i) {
    if (acc[i] - acc[i - 1] > acc[jump_at] - acc[jump_at - 1]) jump_at = i;
  }
  // the grid point nearest kappa*/N = 10/18
  std::size_t anchor = 0;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    if (std::abs(r.grid[i] - 10.0 / 18.0) < std::abs(r.grid[anchor] - 10.0 / 18.0)) anchor = i;
  }
  const bool located = (jump_at > anchor ? jump_at - anchor : anchor - jump_at) <= 1;
  std::string curve;
  for (double a : acc) curve += fmt("%.3f ", a);
  return {high >= low + 0.15 && located,
          fmt("acc{12,14}/18=%.3f acc{4,6}/18=%.3f (need +0.15); largest jump %+.3f into kappa/N=%.3f; curve: %s", high,
              low, acc[jump_at] - acc[jump_at - 1], r.grid[jump_at], curve.c_str())};
}

Outcome ml_beats_sve() {
  const auto& r = ieee9_sweep();
  auto regime_mean = [&](const std::string& d) {
    const auto acc = series_means(r, d, Metric::acc);
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
      if (r.grid[i] >= 0.61) {
        s += acc[i];
        ++n;
      }
    }
    return s / n;
  };
  const double sve = regime_mean("sve");
  Outcome out{true, fmt("sve=%.3f", sve)};
  for (const char* d : {"svm-gaussian", "knn", "slr"}) {
    const double v = regime_mean(d);
    out.pass = out.pass && v >= sve + 0.10;
    out.detail += fmt(" %s=%.3f", d, v);
  }
  return out;
}

// --- 5 ----------------------------------------------------------------------

Outcome sve_trends() {
  SweepConfig c;
  c.system = BuiltinCase::ieee57;
  c.detectors = {"sve"};
  c.repetitions = 10;
  c.seed = 20240602;
  const auto r = run_sweep(c);
  const double rho_rec = spearman(r.grid, series_means(r, "sve", Metric::rec));
  const double rho_prec2 = spearman(r.grid, series_means(r, "sve", Metric::prec2));
  std::string rec;
  for (double v : series_means(r, "sve", Metric::rec)) rec += fmt("%.3f ", v);
  return {rho_rec >= 0.6 && rho_prec2 <= -0.6,
          fmt("spearman(rec)=%.3f (need >= 0.6) spearman(prec2)=%.3f (need <= -0.6); rec curve: %s", rho_rec, rho_prec2,
              rec.c_str())};
}

// --- 7 ----------------------------------------------------------------------

Outcome solver_oracles() {
  int failures = 0;
  double worst_svm = 0.0, worst_slr = 0.0;
  // SVM dual against the projected-gradient QP oracle
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto ds = blobs(14 + 2 * seed, 2, 1.0, 1100 + seed);
    for (auto kernel : {KernelDescriptor::linear(), KernelDescriptor::gaussian(1.0)}) {
      for (double C : {0.5, 5.0}) {
        SmoSolution sol;
        train_svm(ds, C, kernel, {}, &sol);
        const double oracle = svm_dual_oracle(gram_matrix(ds.samples, kernel), ds.labels, C);
        worst_svm = std::max(worst_svm, std::abs(sol.dual_objective - oracle) / std::abs(oracle));
      }
    }
  }
  failures += worst_svm > 1e-3;
  // SLR against proximal gradient, and the lambda_max collapse
  int nonzero_at_max = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto ds = blobs(40, 3, 1.0, 1200 + seed);
    const double lmax = slr_lambda_max(ds);
    for (double omega : {0.1, 0.5}) {
      const auto model = train_slr(ds, omega);
      const double oracle = slr_oracle(ds, omega * lmax);
      worst_slr = std::max(worst_slr, std::abs(slr_objective(ds, model) - oracle) / oracle);
    }
    for (double f : {1.0, 1.5, 4.0}) nonzero_at_max += train_slr_lambda(ds, f * lmax).w.lpNorm<Eigen::Infinity>() != 0.0;
  }
  failures += worst_slr > 1e-3;
  failures += nonzero_at_max > 0;
  // kNN against a brute-force scan
  std::size_t knn_mismatch = 0;
  {
    const auto train = blobs(70, 3, 1.0, 1300);
    const auto test = blobs(50, 3, 1.0, 1301);
    const auto model = train_knn(train);
    for (const auto& s : test.samples) knn_mismatch += model.predict(s) != knn_brute_force(train, s, model.k, train.size());
    std::vector<std::size_t> loo(static_cast<std::size_t>(knn_max_k(train.size())), 0);
    for (int k = 1; k <= knn_max_k(train.size()); ++k) {
      for (std::size_t i = 0; i < train.size(); ++i) {
        loo[static_cast<std::size_t>(k - 1)] += knn_brute_force(train, train.samples[i], k, i) != train.labels[i];
      }
    }
    knn_mismatch += loo != model.loo_errors;
  }
  failures += knn_mismatch > 0;
  // AdaBoost bound on every prefix of every trace, and stump search vs enumeration
  std::size_t bound_violations = 0, stump_mismatch = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto ds = blobs(50, 2, 1.0, 1400 + seed);
    const auto model = train_adaboost(ds, 30);
    double prod = 1.0;
    for (std::size_t t = 0; t < model.rounds(); ++t) {
      prod *= model.partitions[t];
      std::size_t wrong = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) wrong += decision_sign(model.decision_value(ds.samples[i], t + 1)) != ds.labels[i];
      bound_violations += static_cast<double>(wrong) / static_cast<double>(ds.size()) > prod + 1e-12;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(ds.size());
    for (auto& x : w) x = u(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < 2; ++j) {
      std::vector<double> cands = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      for (const auto& s : ds.samples) cands.push_back(s(j));
      for (double thr : cands) {
        for (int pol : {1, -1}) {
          const StumpModel st{j, thr, pol};
          double err = 0.0;
          for (std::size_t i = 0; i < ds.size(); ++i) err += (st.predict(ds.samples[i]) != ds.labels[i]) * w[i];
          best = std::min(best, err);
        }
      }
    }
    stump_mismatch += std::abs(search_stump(ds, w).error - best) > 1e-12;
  }
  failures += bound_violations > 0;
  failures += stump_mismatch > 0;
  return {failures == 0, fmt("svm rel=%.1e slr rel=%.1e lambda_max nonzero=%d knn mismatches=%zu "
                             "adaboost bound violations=%zu stump mismatches=%zu",
                             worst_svm, worst_slr, nonzero_at_max, knn_mismatch, bound_violations, stump_mismatch)};
}

// --- 8 ----------------------------------------------------------------------

// Checked at the two learning-curve settings kappa/N = 0.33 (observable) and 0.66 (unobservable).
Outcome online_curves() {
  const auto m = build_dc_model(load_builtin(BuiltinCase::ieee9), 0.01);
  Outcome out{true, ""};
  for (double point : {6.0 / 18.0, 12.0 / 18.0}) {
    const Index kappa = kappa_for(point, m.num_measurements());
    const auto kind = attack_kind_for(m, kappa);
    int opwm_grows = 0, svm_grows = 0, opwm_recall = 0;
    std::size_t length = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto train = assemble_dataset(detail::generate_pool(m, kappa, kind, seed, 0, TrialPool::train, 50), 18);
      const auto test = assemble_dataset(detail::generate_pool(m, kappa, kind, seed, 0, TrialPool::test, 50), 18);
      const auto stream = shuffled(train, cell_seed(seed, 0));
      length = stream.size();
      const auto opwm = run_stream(OnlineAlgorithm::opwm, stream, test, 90);
      const auto svm = run_stream(OnlineAlgorithm::online_svm, stream, test, 90);
      const auto op = run_stream(OnlineAlgorithm::op, stream, test, 90);
      opwm_grows += opwm.curve.accuracy.back() >= opwm.curve.accuracy.front();
      svm_grows += svm.curve.accuracy.back() >= svm.curve.accuracy.front();
      opwm_recall += opwm.curve.recall_attacked.back() >= op.curve.recall_attacked.back();
    }
    out.pass = out.pass && opwm_grows >= 6 && svm_grows >= 6 && opwm_recall >= 6;
    out.detail += fmt("kappa=%ld (%zu samples): opwm final>=first %d/10, online-svm final>=first %d/10, "
                      "opwm rec1>=op rec1 %d/10; ",
                      static_cast<long>(kappa), length, opwm_grows, svm_grows, opwm_recall);
  }
  return out;
}

// --- 9 ----------------------------------------------------------------------

Outcome determinism_and_format() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt("fdia-acceptance-%d", static_cast<int>(std::random_device{}() % 100000));
  fs::create_directories(dir);
  SweepConfig c;
  c.system = BuiltinCase::ieee9;
  c.detectors = {"sve", "knn", "slr", "svm-gaussian", "op", "opwm", "online-svm"};
  c.grid = {0.3, 0.6, 0.9};
  c.repetitions = 2;
  c.train_trials = 10;
  c.test_trials = 10;
  c.seed = 77;
  const auto first = run_sweep(c);
  export_results(first, (dir / "first.csv").string());
  std::ifstream manifest(dir / "first.csv.manifest.jsonl");
  const auto again = run_sweep(read_manifest_config(manifest));
  export_results(again, (dir / "second.csv").string());
  const bool same = slurp(dir / "first.csv") == slurp(dir / "second.csv") && !slurp(dir / "first.csv").empty();
  fs::remove_all(dir);

  int exact = 0;
  for (auto which : kSystems) {
    const auto cs = load_builtin(which);
    const auto text = serialize_case(cs);
    const auto back = parse_case(text);
    exact += back == cs && serialize_case(back) == text;
  }
  return {same && exact == 3, fmt("manifest rerun byte-identical: %s; exact parser round trips: %d/3", same ? "yes" : "no", exact)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"kappa* anchor", kappa_star_anchor},
      {"unobservable annihilation", annihilation},
      {"chi-square calibration", chi2_calibration},
      {"SVM phase transition", svm_phase_transition},
      {"SVE trends", sve_trends},
      {"ML beats SVE", ml_beats_sve},
      {"solver oracles", solver_oracles},
      {"online learning curves", online_curves},
      {"determinism and format", determinism_and_format},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %d %s [%.1fs] %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
