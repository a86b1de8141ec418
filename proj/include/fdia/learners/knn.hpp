#pragma once

// k-nearest-neighbour classifier with k chosen by leave-one-out error.
// Neighbours are ordered by (distance, stored index); vote ties go to +1.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"

namespace fdia {

struct KnnModel {
  std::vector<Eigen::VectorXd> samples;
  std::vector<int> labels;
  int k = 1;
  std::vector<std::size_t> loo_errors;  // index k-1, filled by train_knn

  /// Stored indices sorted by distance to `s`, first `count` only.
  std::vector<std::size_t> nearest(const Eigen::VectorXd& s, std::size_t count,
                                   std::size_t exclude = static_cast<std::size_t>(-1)) const {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j != exclude) d.emplace_back((samples[j] - s).squaredNorm(), j);
    }
    count = std::min(count, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(count), d.end());
    std::vector<std::size_t> out(count);
    for (std::size_t q = 0; q < count; ++q) out[q] = d[q].second;
    return out;
  }

  int predict(const Eigen::VectorXd& s) const {
    if (samples.empty()) throw ContractError("knn: empty model");
    require_dimension(samples.front().size(), s.size());
    int vote = 0;
    for (auto j : nearest(s, static_cast<std::size_t>(k))) vote += labels[j];
    return vote >= 0 ? kAttacked : kSecure;
  }
};

/// Largest admissible k for M training samples: floor(sqrt(M)), capped at M-1
/// so that leave-one-out still has k neighbours.
inline int knn_max_k(std::size_t m) {
  auto k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m))));
  while ((k + 1) * (k + 1) <= m) ++k;
  while (k * k > m) --k;
  return static_cast<int>(std::clamp<std::size_t>(k, 1, m - 1));
}

inline KnnModel train_knn(const LabeledDataset& train) {
  if (train.size() < 2) throw ContractError("train_knn: at least two samples are required");
  train.dimension();
  for (int y : train.labels) require_label(y);

  KnnModel model;
  model.samples = train.samples;
  model.labels = train.labels;
  const int kmax = knn_max_k(train.size());
  model.loo_errors.assign(static_cast<std::size_t>(kmax), 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto order = model.nearest(train.samples[i], static_cast<std::size_t>(kmax), i);
    int vote = 0;
    for (int k = 1; k <= kmax; ++k) {
      vote += train.labels[order[static_cast<std::size_t>(k - 1)]];
      const int predicted = vote >= 0 ? kAttacked : kSecure;
      model.loo_errors[static_cast<std::size_t>(k - 1)] += predicted != train.labels[i];
    }
  }
  const auto best = std::min_element(model.loo_errors.begin(), model.loo_errors.end());
  model.k = static_cast<int>(best - model.loo_errors.begin()) + 1;
  return model;
}

/// Stores the training set with a fixed k, skipping the leave-one-out search.
inline KnnModel make_knn(const LabeledDataset& train, int k) {
  if (train.empty()) throw ContractError("make_knn: empty training set");
  if (k < 1 || static_cast<std::size_t>(k) > train.size()) throw ContractError("make_knn: k out of range");
  train.dimension();
  KnnModel model;
  model.samples = train.samples;
  model.labels = train.labels;
  model.k = k;
  return model;
}

}  // namespace fdia
