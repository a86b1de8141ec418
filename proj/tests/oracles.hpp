#pragma once

// Independent reference solvers shared by the unit tests and the acceptance run.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fdia/dataset.hpp"

namespace fdia::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Two Gaussian blobs with overlap controlled by `gap`.
inline LabeledDataset blobs(std::size_t m, Eigen::Index d, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  LabeledDataset ds;
  for (std::size_t i = 0; i < m; ++i) {
    const int y = (i % 3 == 0) ? kAttacked : kSecure;
    VectorXd s(d);
    for (Eigen::Index j = 0; j < d; ++j) s(j) = g(rng) + (y == kAttacked ? gap : 0.0) * (j == 0 ? 1.0 : 0.5);
    ds.push_back(s, y);
  }
  return ds;
}

// Accelerated projected gradient for min 1/2 b'Qb - e'b, 0 <= b <= C, y'b = 0.
inline double svm_dual_oracle(const MatrixXd& K, const std::vector<int>& y, double C) {
  const auto m = static_cast<Eigen::Index>(y.size());
  VectorXd yv(m);
  for (Eigen::Index i = 0; i < m; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  const MatrixXd Q = yv.asDiagonal() * K * yv.asDiagonal();
  const double L = Eigen::SelfAdjointEigenSolver<MatrixXd>(Q).eigenvalues().maxCoeff() + 1e-12;
  auto project = [&](const VectorXd& v) {
    double lo = -1e6, hi = 1e6;
    VectorXd b(m);
    for (int it = 0; it < 200; ++it) {
      const double mu = 0.5 * (lo + hi);
      b = (v - mu * yv).cwiseMax(0.0).cwiseMin(C);
      (yv.dot(b) > 0.0 ? lo : hi) = mu;
    }
    return b;
  };
  VectorXd x = VectorXd::Zero(m), z = x;
  double t = 1.0;
  for (int it = 0; it < 50000; ++it) {
    const VectorXd next = project(z - (Q * z - VectorXd::Ones(m)) / L);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / tn) * (next - x);
    x = next;
    t = tn;
  }
  return x.sum() - 0.5 * x.dot(Q * x);
}

// FISTA on sum logistic(y (w's + b)) + lambda ||w||_1 with a free bias.
inline double slr_oracle(const LabeledDataset& ds, double lambda) {
  const auto m = static_cast<Eigen::Index>(ds.size());
  const auto d = ds.samples.front().size();
  MatrixXd X(m, d + 1);
  VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    X.row(i).head(d) = ds.samples[static_cast<std::size_t>(i)].transpose();
    X(i, d) = 1.0;
    y(i) = ds.labels[static_cast<std::size_t>(i)];
  }
  const double L = 0.25 * Eigen::JacobiSVD<MatrixXd>(X).singularValues()(0) * Eigen::JacobiSVD<MatrixXd>(X).singularValues()(0);
  auto objective = [&](const VectorXd& th) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double mg = y(i) * X.row(i).dot(th);
      f += mg > 0 ? std::log1p(std::exp(-mg)) : -mg + std::log1p(std::exp(mg));
    }
    return f + lambda * th.head(d).lpNorm<1>();
  };
  auto grad = [&](const VectorXd& th) {
    VectorXd g = VectorXd::Zero(d + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double mg = y(i) * X.row(i).dot(th);
      g -= y(i) / (1.0 + std::exp(mg)) * X.row(i).transpose();
    }
    return g;
  };
  VectorXd x = VectorXd::Zero(d + 1), z = x;
  double t = 1.0;
  for (int it = 0; it < 40000; ++it) {
    VectorXd next = z - grad(z) / L;
    for (Eigen::Index j = 0; j < d; ++j) {
      next(j) = std::copysign(std::max(std::abs(next(j)) - lambda / L, 0.0), next(j));
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / tn) * (next - x);
    x = next;
    t = tn;
  }
  return objective(x);
}

// k-NN vote by full sort over (distance, index).
inline int knn_brute_force(const LabeledDataset& train, const VectorXd& s, int k, std::size_t exclude) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j = 0; j < train.size(); ++j) {
    if (j != exclude) d.emplace_back((train.samples[j] - s).squaredNorm(), j);
  }
  std::sort(d.begin(), d.end());
  int vote = 0;
  for (int q = 0; q < k; ++q) vote += train.labels[d[static_cast<std::size_t>(q)].second];
  return vote >= 0 ? kAttacked : kSecure;
}

// Penalized logistic objective of a fitted SLR model.
template <class Model>
double slr_objective(const LabeledDataset& ds, const Model& model) {
  double f = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double mg = ds.labels[i] * model.decision_value(ds.samples[i]);
    f += mg > 0 ? std::log1p(std::exp(-mg)) : -mg + std::log1p(std::exp(mg));
  }
  return f + model.lambda * model.w.template lpNorm<1>();
}

}  // namespace fdia::testing
