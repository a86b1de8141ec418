#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "fdia/attackgen.hpp"
#include "fdia/chi2.hpp"

using namespace fdia;

namespace {

const DcModel& ieee9() {
  static const DcModel m = build_dc_model(load_builtin(BuiltinCase::ieee9), 0.01);
  return m;
}

double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(Attackgen, NoAttack) {
  const auto t = generate_trial(ieee9(), {AttackKind::none, 0, 11});
  EXPECT_EQ(t.a.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.z_tilde, t.z);
  EXPECT_TRUE(std::all_of(t.labels.begin(), t.labels.end(), [](int y) { return y == kSecure; }));
  EXPECT_TRUE(t.support.empty());
}

TEST(Attackgen, FullObservableSupport) {
  const auto t = generate_trial(ieee9(), {AttackKind::observable, 18, 5});
  EXPECT_TRUE(std::all_of(t.labels.begin(), t.labels.end(), [](int y) { return y == kAttacked; }));
}

TEST(Attackgen, LabelsSupportAndDeterminism) {
  const auto& m = ieee9();
  for (Index kappa = 1; kappa <= 18; ++kappa) {
    for (auto kind : {AttackKind::observable, AttackKind::unobservable}) {
      if (kind == AttackKind::unobservable && kappa < m.kappa_star()) continue;
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const AttackSpec spec{kind, kappa, 1000 * static_cast<std::uint64_t>(kappa) + seed};
        const auto t = generate_trial(m, spec);
        ASSERT_EQ(static_cast<Index>(t.support.size()), kappa);
        Index nonzero = 0;
        for (Index i = 0; i < t.a.size(); ++i) {
          const bool in = std::binary_search(t.support.begin(), t.support.end(), i);
          EXPECT_EQ(t.labels[static_cast<std::size_t>(i)], in ? kAttacked : kSecure);
          nonzero += t.a(i) != 0.0;
          if (!in) EXPECT_EQ(t.a(i), 0.0);
        }
        EXPECT_EQ(nonzero, kappa);
        EXPECT_EQ(t.z_tilde, t.z + t.a);
        const auto again = generate_trial(m, spec);
        EXPECT_EQ(again.z_tilde, t.z_tilde);
        EXPECT_EQ(again.a, t.a);
        EXPECT_EQ(again.support, t.support);
      }
    }
  }
}

TEST(Attackgen, UnobservableAttacksLieInColumnSpace) {
  for (auto which : {BuiltinCase::ieee9, BuiltinCase::ieee57, BuiltinCase::ieee118}) {
    const auto m = build_dc_model(load_builtin(which), 0.01);
    Eigen::JacobiSVD<MatrixXd> svd(m.H, Eigen::ComputeThinU);
    svd.setThreshold(1e-10);
    const MatrixXd U = svd.matrixU().leftCols(svd.rank());
    const Index n = m.num_measurements();
    for (Index kappa : {m.kappa_star(), (m.kappa_star() + n) / 2, n}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto t = generate_trial(m, {AttackKind::unobservable, kappa, seed});
        ASSERT_TRUE(t.c.has_value());
        EXPECT_LT((t.a - m.H * *t.c).norm(), 1e-9 * t.a.norm());
        EXPECT_LT((t.a - U * (U.transpose() * t.a)).norm(), 1e-9 * t.a.norm());
        const double before = residual_detect(m, t.z).residual_rho;
        const double after = residual_detect(m, t.z_tilde).residual_rho;
        EXPECT_NEAR(after, before, 1e-9 * before);

        const double sigma_z = sample_sd(std::vector<double>(t.z.data(), t.z.data() + t.z.size()));
        std::vector<double> on;
        for (auto i : t.support) {
          on.push_back(t.a(i));
          EXPECT_GE(std::abs(t.a(i)), 1e-3 * sigma_z);
        }
        EXPECT_NEAR(sample_sd(on), sigma_z, 1e-9 * sigma_z);
      }
    }
  }
}

TEST(Attackgen, InfeasibleBelowKappaStar) {
  const auto& m = ieee9();
  std::mt19937_64 rng(1);
  // attack the nine branch flows; the nine injections then pin the angles
  std::vector<Index> flows = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_THROW(make_unobservable_attack(m, flows, 1.0, rng), InfeasibleAttackError);
  EXPECT_THROW(generate_trial(m, {AttackKind::unobservable, 9, 1}), ContractError);
}

TEST(Attackgen, FullSupportUnobservable) {
  const auto& m = ieee9();
  std::mt19937_64 rng(2);
  std::vector<Index> all(18);
  for (Index i = 0; i < 18; ++i) all[static_cast<std::size_t>(i)] = i;
  const auto att = make_unobservable_attack(m, all, 2.0, rng);
  EXPECT_LT((att.a - m.H * att.c).norm(), 1e-9 * att.a.norm());
  EXPECT_GT(att.a.cwiseAbs().minCoeff(), 0.0);
}

TEST(Attackgen, SpecValidation) {
  const auto& m = ieee9();
  EXPECT_THROW(generate_trial(m, {AttackKind::none, 3, 0}), ContractError);
  EXPECT_THROW(generate_trial(m, {AttackKind::observable, 0, 0}), ContractError);
  EXPECT_THROW(generate_trial(m, {AttackKind::observable, 19, 0}), ContractError);
}

TEST(Attackgen, SupportsAreUniform) {
  const auto& m = ieee9();
  const Index n = m.num_measurements();
  const int trials = 10000;
  const Index kappa = 5;
  std::vector<double> count(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < trials; ++t) {
    for (auto i : generate_trial(m, {AttackKind::observable, kappa, static_cast<std::uint64_t>(t)}).support) {
      count[static_cast<std::size_t>(i)] += 1.0;
    }
  }
  const double expected = static_cast<double>(trials) * static_cast<double>(kappa) / static_cast<double>(n);
  double stat = 0.0;
  for (double c : count) stat += (c - expected) * (c - expected) / expected;
  EXPECT_LT(stat, chi2_inverse_cdf(0.99, static_cast<int>(n - 1)));
}

TEST(Attackgen, DetectionGrowsWithMagnitude) {
  const auto& m = ieee9();
  double previous = -1.0;
  // at noise level the rate only fluctuates, so allow Monte-Carlo slack
  for (double scale : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    int flagged = 0;
    for (std::uint64_t s = 0; s < 300; ++s) {
      const auto t = generate_trial(m, {AttackKind::observable, 5, s});
      flagged += residual_detect(m, t.z + scale * t.a).attacked_flag;
    }
    const double rate = flagged / 300.0;
    EXPECT_GE(rate, previous - 0.03);
    previous = rate;
  }
  EXPECT_GT(previous, 0.9);
}

TEST(Attackgen, AssembleDataset) {
  const auto& m = ieee9();
  const auto one = generate_trial(m, {AttackKind::observable, 7, 3});
  const auto ds = assemble_dataset({one}, 18);
  ASSERT_EQ(ds.size(), 18u);
  for (std::size_t i = 0; i < 18; ++i) {
    EXPECT_EQ(ds.labels[i], one.labels[i]);
    EXPECT_EQ(ds.samples[i].size(), 1);
    EXPECT_EQ(ds.samples[i](0), one.z_tilde(static_cast<Index>(i)));
  }

  std::vector<Trial> trials;
  for (std::uint64_t s = 0; s < 50; ++s) trials.push_back(generate_trial(m, {AttackKind::observable, 4, s}));
  EXPECT_EQ(assemble_dataset(trials, 18).size(), 900u);

  const auto whole = assemble_dataset({one}, 1);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole.labels[0], kAttacked);
  EXPECT_EQ(whole.samples[0], one.z_tilde);
  EXPECT_EQ(assemble_dataset({generate_trial(m, {AttackKind::none, 0, 1})}, 1).labels[0], kSecure);

  // G = 4 over 18 measurements: sizes 5,5,4,4; a cluster is attacked if any member is
  const auto four = assemble_dataset({one}, 4);
  std::vector<int> sizes;
  for (const auto& s : four.samples) sizes.push_back(static_cast<int>(s.size()));
  EXPECT_EQ(sizes, (std::vector<int>{5, 5, 4, 4}));
  std::size_t start = 0;
  for (std::size_t g = 0; g < 4; ++g) {
    bool any = false;
    for (std::size_t k = 0; k < static_cast<std::size_t>(sizes[g]); ++k) any |= one.labels[start + k] == kAttacked;
    EXPECT_EQ(four.labels[g], any ? kAttacked : kSecure);
    start += static_cast<std::size_t>(sizes[g]);
  }
  EXPECT_THROW(assemble_dataset({}, 3), ContractError);
  EXPECT_THROW(four.dimension(), ContractError);
}

TEST(Attackgen, SeparationStats) {
  LabeledDataset ds;
  Eigen::VectorXd u(2), v(2);
  u << 1, 2;
  v << 4, 6;
  for (int i = 0; i < 4; ++i) {
    ds.push_back(u, kAttacked);
    ds.push_back(v, kSecure);
  }
  const auto st = separation_stats(ds);
  EXPECT_DOUBLE_EQ(st.within_attacked, 0.0);
  EXPECT_DOUBLE_EQ(st.within_secure, 0.0);
  EXPECT_DOUBLE_EQ(st.cross, 5.0);

  std::vector<Trial> trials;
  for (std::uint64_t s = 0; s < 50; ++s) trials.push_back(generate_trial(ieee9(), {AttackKind::observable, 12, s}));
  auto data = assemble_dataset(trials, 18);
  const auto a = separation_stats(data);
  EXPECT_GT(a.cross, a.within_secure);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  const auto b = separation_stats(data.subset(order));
  EXPECT_NEAR(a.cross, b.cross, 1e-12 * a.cross);
  EXPECT_NEAR(a.within_attacked, b.within_attacked, 1e-12 * a.within_attacked);
  EXPECT_NEAR(a.within_secure, b.within_secure, 1e-12 * a.within_secure);

  LabeledDataset single;
  single.push_back(u, kAttacked);
  single.push_back(v, kAttacked);
  EXPECT_THROW(separation_stats(single), DiagnosticError);
}

TEST(Attackgen, DatasetCsv) {
  const auto ds = assemble_dataset({generate_trial(ieee9(), {AttackKind::observable, 3, 1})}, 18);
  std::ostringstream os;
  write_dataset_csv(os, ds);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "trial,cluster,label,f0");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 18u);
}
