#pragma once

// Multiple kernel learning: an SVM on K = sum_u d_u K_u with d on the
// probability simplex, optimized by alternating SMO solves and projected
// (reduced) gradient steps on d.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"
#include "fdia/learners/svm.hpp"

namespace fdia {

struct MklModel {
  std::vector<KernelDescriptor> kernels;
  Eigen::VectorXd weights;  // d, on the simplex
  std::vector<Eigen::VectorXd> support_vectors;
  std::vector<int> support_labels;
  std::vector<double> beta;
  double bias = 0.0;
  double C = 1.0;
  Eigen::Index dimension = 0;
  std::vector<double> objective_trace;  // SVM objective after each accepted weight update
  int outer_iterations = 0;

  double combined_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    double k = 0.0;
    for (std::size_t u = 0; u < kernels.size(); ++u) {
      if (weights(static_cast<Eigen::Index>(u)) != 0.0) k += weights(static_cast<Eigen::Index>(u)) * kernels[u](a, b);
    }
    return k;
  }
  double decision_value(const Eigen::VectorXd& s) const {
    require_dimension(dimension, s.size());
    double f = bias;
    for (std::size_t i = 0; i < beta.size(); ++i) f += beta[i] * support_labels[i] * combined_kernel(support_vectors[i], s);
    return f;
  }
  int predict(const Eigen::VectorXd& s) const { return decision_sign(decision_value(s)); }
};

struct MklOptions {
  int max_outer_iterations = 50;
  double relative_decrease = 1e-4;
  int max_backtracks = 30;
  SmoOptions smo{};
};

/// Euclidean projection onto {d >= 0, sum d = 1} by sorting.
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const auto n = v.size();
  if (n == 0) throw ContractError("project_to_simplex: empty vector");
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  Eigen::VectorXd d = (v.array() - theta).cwiseMax(0.0);
  d /= d.sum();
  return d;
}

/// SVM objective (primal value = dual value at the optimum) for kernel weights d.
struct MklEvaluation {
  SmoSolution solution;
  double objective = 0.0;
};

inline MklModel train_mkl(const LabeledDataset& train, const std::vector<KernelDescriptor>& kernels, double C,
                          const MklOptions& options = {}) {
  if (kernels.size() < 2) throw ContractError("train_mkl: at least two kernels are required");
  if (!(C > 0.0)) throw ContractError("train_mkl: C must be positive");
  if (!train.has_both_classes()) throw ContractError("train_mkl: both classes must be present");
  train.dimension();
  for (int y : train.labels) require_label(y);

  const auto U = static_cast<Eigen::Index>(kernels.size());
  const auto m = static_cast<Eigen::Index>(train.size());
  std::vector<Eigen::MatrixXd> grams;
  grams.reserve(kernels.size());
  for (const auto& k : kernels) grams.push_back(gram_matrix(train.samples, k));
  const std::vector<double> upper(train.size(), C);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) y(i) = train.labels[static_cast<std::size_t>(i)];

  auto evaluate = [&](const Eigen::VectorXd& d, const Eigen::VectorXd* warm) {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index u = 0; u < U; ++u) {
      if (d(u) != 0.0) K += d(u) * grams[static_cast<std::size_t>(u)];
    }
    MklEvaluation e;
    e.solution = solve_smo(K, train.labels, upper, options.smo, warm);
    e.objective = e.solution.dual_objective;
    return e;
  };
  auto gradient = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd yb = y.cwiseProduct(beta);
    Eigen::VectorXd g(U);
    for (Eigen::Index u = 0; u < U; ++u) g(u) = -0.5 * yb.dot(grams[static_cast<std::size_t>(u)] * yb);
    return g;
  };

  MklModel model;
  model.kernels = kernels;
  model.C = C;
  model.dimension = train.samples.front().size();
  Eigen::VectorXd d = Eigen::VectorXd::Constant(U, 1.0 / static_cast<double>(U));
  auto current = evaluate(d, nullptr);
  model.objective_trace.push_back(current.objective);

  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    model.outer_iterations = outer + 1;
    const Eigen::VectorXd g = gradient(current.solution.beta);
    // Reduced gradient: the component along the simplex plane.
    const Eigen::VectorXd reduced = g.array() - g.mean();
    const double scale = reduced.lpNorm<Eigen::Infinity>();
    if (scale <= 0.0) break;
    double step = 1.0 / scale;
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt, step *= 0.5) {
      const Eigen::VectorXd candidate = project_to_simplex(d - step * g);
      if ((candidate - d).lpNorm<Eigen::Infinity>() == 0.0) break;
      auto trial = evaluate(candidate, nullptr);
      if (trial.objective < current.objective) {
        const double decrease = (current.objective - trial.objective) / std::max(std::abs(current.objective), 1e-300);
        d = candidate;
        current = std::move(trial);
        model.objective_trace.push_back(current.objective);
        accepted = decrease >= options.relative_decrease;
        break;
      }
    }
    if (!accepted) break;
  }

  model.weights = d;
  model.bias = current.solution.bias;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (current.solution.beta(i) > 0.0) {
      model.support_vectors.push_back(train.samples[static_cast<std::size_t>(i)]);
      model.support_labels.push_back(train.labels[static_cast<std::size_t>(i)]);
      model.beta.push_back(current.solution.beta(i));
    }
  }
  return model;
}

}  // namespace fdia
