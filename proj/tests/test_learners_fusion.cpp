#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "fdia/learners/mkl.hpp"
#include "fdia/learners/s3vm.hpp"

using namespace fdia;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LabeledDataset clusters(std::size_t m, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  LabeledDataset ds;
  for (std::size_t i = 0; i < m; ++i) {
    const int y = i % 2 ? kAttacked : kSecure;
    VectorXd s(2);
    s << (y == kAttacked ? 2.0 : -2.0) + g(rng), g(rng);
    ds.push_back(s, y);
  }
  return ds;
}

double accuracy(const auto& model, const LabeledDataset& ds) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += model.predict(ds.samples[i]) == ds.labels[i];
  return static_cast<double>(ok) / static_cast<double>(ds.size());
}

}  // namespace

// --- S3VM -----------------------------------------------------------------------

TEST(S3vm, FallsBackToSupervised) {
  const auto train = clusters(20, 1.0, 1);
  const auto pool = clusters(50, 1.0, 2);
  const auto svm = train_svm(train, 1.0, KernelDescriptor::linear());
  const VectorXd w = svm.linear_weights();

  const auto no_weight = train_s3vm(train, pool.samples, 1.0, 0.0);
  EXPECT_FALSE(no_weight.used_unlabeled);
  EXPECT_TRUE(no_weight.w.isApprox(w, 1e-12));
  EXPECT_DOUBLE_EQ(no_weight.b, svm.bias);

  const auto none = train_s3vm(train, {}, 1.0, 1.0);
  EXPECT_FALSE(none.used_unlabeled);
  EXPECT_TRUE(none.w.isApprox(w, 1e-12));

  S3vmOptions literal;
  literal.literal_unlabeled_loss = true;
  const auto lit = train_s3vm(train, pool.samples, 1.0, 1.0, literal);
  EXPECT_FALSE(lit.used_unlabeled);
  EXPECT_TRUE(lit.w.isApprox(w, 1e-12));
}

TEST(S3vm, BalancedPseudoLabels) {
  const std::vector<double> v = {0.3, -1.0, 2.0, 0.3, 5.0, -2.0, 0.0};
  // fraction 3/7 -> the three largest, with the tie at 0.3 pulled in
  const auto l = detail::balanced_labels(v, 3.0 / 7.0);
  EXPECT_EQ(l, (std::vector<int>{1, -1, 1, 1, 1, -1, -1}));
  const auto none = detail::balanced_labels(v, 0.0);
  EXPECT_TRUE(std::all_of(none.begin(), none.end(), [](int y) { return y == kSecure; }));
  for (double p : {0.1, 0.25, 0.5, 0.9}) {
    std::vector<double> u(40);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(static_cast<double>(i) * 1.7);
    const auto lab = detail::balanced_labels(u, p);
    EXPECT_EQ(static_cast<std::size_t>(std::count(lab.begin(), lab.end(), kAttacked)),
              static_cast<std::size_t>(std::ceil(p * 40.0 - 1e-12)));
  }
}

TEST(S3vm, UsesUnlabeledStructure) {
  // Six labeled points that put the supervised boundary off centre, plus a
  // well separated unlabeled pool.
  LabeledDataset train;
  auto add = [&](double x, double y, int label) {
    VectorXd s(2);
    s << x, y;
    train.push_back(s, label);
  };
  add(-0.5, 2.0, kSecure);
  add(-0.6, -2.0, kSecure);
  add(-0.4, 0.0, kSecure);
  add(3.5, 2.0, kAttacked);
  add(3.6, -2.0, kAttacked);
  add(3.4, 0.0, kAttacked);
  const auto pool = clusters(200, 0.5, 9);
  const auto sup = train_s3vm(train, pool.samples, 1.0, 0.0);
  const auto semi = train_s3vm(train, pool.samples, 1.0, 1.0);
  EXPECT_TRUE(semi.used_unlabeled);
  EXPECT_GT(semi.relabel_rounds, 0);
  EXPECT_GE(accuracy(semi, pool), accuracy(sup, pool));
  EXPECT_GE(accuracy(semi, pool), 0.95);
  const auto again = train_s3vm(train, pool.samples, 1.0, 1.0);
  EXPECT_EQ(again.w, semi.w);
  EXPECT_EQ(again.b, semi.b);
}

TEST(S3vm, Contracts) {
  const auto train = clusters(10, 1.0, 1);
  EXPECT_THROW(train_s3vm(train, {}, 0.0, 1.0), ContractError);
  EXPECT_THROW(train_s3vm(train, {}, 1.0, -1.0), ContractError);
  EXPECT_THROW(train_s3vm(train, {VectorXd::Ones(3)}, 1.0, 1.0), ContractError);
}

// --- MKL ------------------------------------------------------------------------

TEST(Mkl, SimplexProjection) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    VectorXd v(5);
    for (Eigen::Index i = 0; i < 5; ++i) v(i) = g(rng);
    const VectorXd p = project_to_simplex(v);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
    // optimality: v - p is constant on the support and no larger off it
    double shift = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (p(i) > 0.0) {
        if (std::isnan(shift)) shift = v(i) - p(i);
        EXPECT_NEAR(v(i) - p(i), shift, 1e-12);
      }
    }
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (p(i) == 0.0) EXPECT_LE(v(i), shift + 1e-12);
    }
  }
}

TEST(Mkl, WeightsMatchSimplexGridOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto ds = clusters(40, 1.6, 20 + seed);
    const std::vector<KernelDescriptor> kernels = {KernelDescriptor::linear(), KernelDescriptor::gaussian(0.5)};
    const double C = 2.0;
    const auto model = train_mkl(ds, kernels, C);
    EXPECT_NEAR(model.weights.sum(), 1.0, 1e-12);
    EXPECT_GE(model.weights.minCoeff(), 0.0);
    for (std::size_t t = 1; t < model.objective_trace.size(); ++t) {
      EXPECT_LT(model.objective_trace[t], model.objective_trace[t - 1]);
    }

    const MatrixXd K0 = gram_matrix(ds.samples, kernels[0]);
    const MatrixXd K1 = gram_matrix(ds.samples, kernels[1]);
    const std::vector<double> upper(ds.size(), C);
    SmoOptions tight;
    tight.tolerance = 1e-6;
    double grid_min = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 100; ++k) {
      const double d = k / 100.0;
      const MatrixXd K = (1.0 - d) * K0 + d * K1;
      grid_min = std::min(grid_min, solve_smo(K, ds.labels, upper, tight).dual_objective);
    }
    const MatrixXd Kd = model.weights(0) * K0 + model.weights(1) * K1;
    const double at_weights = solve_smo(Kd, ds.labels, upper, tight).dual_objective;
    EXPECT_LE(at_weights, grid_min * (1.0 + 1e-3)) << "seed " << seed;
    EXPECT_NEAR(model.objective_trace.back(), at_weights, 1e-3 * std::abs(at_weights));
  }
}

TEST(Mkl, PredictsWithCombinedKernel) {
  const auto ds = clusters(40, 1.0, 5);
  const auto model = train_mkl(ds, {KernelDescriptor::linear(), KernelDescriptor::gaussian(1.0)}, 1.0);
  EXPECT_GE(accuracy(model, ds), 0.9);
  const auto& s = ds.samples[0];
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    const double k = model.weights(0) * model.kernels[0](model.support_vectors[i], s) +
                     model.weights(1) * model.kernels[1](model.support_vectors[i], s);
    f += model.beta[i] * model.support_labels[i] * k;
  }
  EXPECT_NEAR(model.decision_value(s), f, 1e-12);
}

TEST(Mkl, Contracts) {
  const auto ds = clusters(10, 1.0, 1);
  EXPECT_THROW(train_mkl(ds, {KernelDescriptor::linear()}, 1.0), ContractError);
  EXPECT_THROW(train_mkl(ds, {KernelDescriptor::linear(), KernelDescriptor::gaussian(1.0)}, 0.0), ContractError);
}
