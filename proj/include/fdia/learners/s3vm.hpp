#pragma once

// Linear semi-supervised SVM. Unlabeled points enter through the hat loss
// max(0, 1 - |f(s)|), handled by alternating pseudo-labelling and weighted
// SVM solves while the unlabeled weight is annealed up to C2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"
#include "fdia/learners/svm.hpp"

namespace fdia {

struct S3vmModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double C1 = 1.0;
  double C2 = 1.0;
  bool used_unlabeled = false;  // false when training fell back to the supervised SVM
  int relabel_rounds = 0;

  double decision_value(const Eigen::VectorXd& s) const {
    require_dimension(w.size(), s.size());
    return w.dot(s) + b;
  }
  int predict(const Eigen::VectorXd& s) const { return decision_sign(decision_value(s)); }
};

struct S3vmOptions {
  int anneal_stages = 7;        // C2/64, C2/32, ..., C2
  int max_relabel_rounds = 20;  // per stage
  // max(0, 1 - ||s'||_1) does not depend on (w, b), so the unlabeled set
  // cannot change the solution. Kept for comparison runs.
  bool literal_unlabeled_loss = false;
  SmoOptions smo{};
};

namespace detail {

// Pseudo-labels with the positive fraction fixed: the ceil(fraction * U)
// largest decision values, and every value tied with the smallest of them,
// become +1.
inline std::vector<int> balanced_labels(const std::vector<double>& values, double positive_fraction) {
  const std::size_t u = values.size();
  std::vector<int> labels(u, kSecure);
  const auto r = static_cast<std::size_t>(std::ceil(positive_fraction * static_cast<double>(u) - 1e-12));
  if (r == 0) return labels;
  std::vector<double> sorted = values;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(r - 1), sorted.end(), std::greater<>());
  const double threshold = sorted[r - 1];
  for (std::size_t i = 0; i < u; ++i) {
    if (values[i] >= threshold) labels[i] = kAttacked;
  }
  return labels;
}

}  // namespace detail

inline S3vmModel train_s3vm(const LabeledDataset& train, const std::vector<Eigen::VectorXd>& unlabeled, double C1,
                            double C2, const S3vmOptions& options = {}) {
  if (train.empty()) throw ContractError("train_s3vm: empty training set");
  if (!(C1 > 0.0) || !(C2 >= 0.0)) throw ContractError("train_s3vm: need C1 > 0 and C2 >= 0");
  const auto d = train.dimension();
  for (const auto& s : unlabeled) require_dimension(d, s.size());

  S3vmModel model;
  model.C1 = C1;
  model.C2 = C2;
  const auto supervised = train_svm(train, C1, KernelDescriptor::linear(), options.smo);
  model.w = supervised.linear_weights();
  model.b = supervised.bias;
  if (unlabeled.empty() || C2 == 0.0 || options.literal_unlabeled_loss) return model;

  model.used_unlabeled = true;
  const double positive_fraction = static_cast<double>(train.count(kAttacked)) / static_cast<double>(train.size());
  std::vector<Eigen::VectorXd> samples = train.samples;
  samples.insert(samples.end(), unlabeled.begin(), unlabeled.end());
  const Eigen::MatrixXd K = gram_matrix(samples, KernelDescriptor::linear());
  const std::size_t m = train.size();

  std::vector<double> values(unlabeled.size());
  auto refresh_values = [&] {
    for (std::size_t i = 0; i < unlabeled.size(); ++i) values[i] = model.w.dot(unlabeled[i]) + model.b;
  };
  refresh_values();
  std::vector<int> pseudo = detail::balanced_labels(values, positive_fraction);

  std::vector<int> labels = train.labels;
  labels.resize(samples.size());
  std::vector<double> upper(samples.size(), C1);
  for (int stage = 0; stage < options.anneal_stages; ++stage) {
    const double weight = C2 * std::ldexp(1.0, stage - (options.anneal_stages - 1));
    std::fill(upper.begin() + static_cast<std::ptrdiff_t>(m), upper.end(), weight);
    for (int round = 0; round < options.max_relabel_rounds; ++round) {
      std::copy(pseudo.begin(), pseudo.end(), labels.begin() + static_cast<std::ptrdiff_t>(m));
      const auto sol = solve_smo(K, labels, upper, options.smo);
      const auto svm = detail::assemble_svm(samples, labels, sol, KernelDescriptor::linear(), C1);
      model.w = svm.linear_weights();
      model.b = svm.bias;
      ++model.relabel_rounds;
      refresh_values();
      auto next = detail::balanced_labels(values, positive_fraction);
      if (next == pseudo) break;
      pseudo = std::move(next);
    }
  }
  return model;
}

}  // namespace fdia
