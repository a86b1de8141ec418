#pragma once

// AdaBoost over decision stumps, with the number of rounds optionally chosen
// by leave-one-out error.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"

namespace fdia {

struct StumpModel {
  Eigen::Index feature_index = 0;
  double threshold = 0.0;  // may be +/- infinity
  int polarity = 1;        // output for s[feature] > threshold; -polarity otherwise

  int predict(const Eigen::VectorXd& s) const {
    if (feature_index < 0 || feature_index >= s.size()) throw ContractError("stump feature index out of range");
    return s(feature_index) > threshold ? polarity : -polarity;
  }
  friend bool operator==(const StumpModel&, const StumpModel&) = default;
};

struct AdaboostModel {
  std::vector<StumpModel> stumps;
  std::vector<double> alphas;
  std::vector<double> errors;      // epsilon_t per kept round
  std::vector<double> partitions;  // Z_t per kept round
  Eigen::Index dimension = 0;
  std::vector<std::size_t> loo_errors;  // per candidate T when chosen by leave-one-out
  std::vector<int> loo_candidates;

  std::size_t rounds() const { return stumps.size(); }

  double decision_value(const Eigen::VectorXd& s, std::size_t prefix) const {
    require_dimension(dimension, s.size());
    double f = 0.0;
    for (std::size_t t = 0; t < std::min(prefix, stumps.size()); ++t) f += alphas[t] * stumps[t].predict(s);
    return f;
  }
  double decision_value(const Eigen::VectorXd& s) const { return decision_value(s, stumps.size()); }
  int predict(const Eigen::VectorXd& s) const { return decision_sign(decision_value(s)); }
};

inline constexpr double kAdaboostEpsilonFloor = 1e-12;

inline double adaboost_alpha(double epsilon) {
  const double e = std::max(epsilon, kAdaboostEpsilonFloor);
  return 0.5 * std::log((1.0 - e) / e);
}

struct StumpSearchResult {
  StumpModel stump;
  double error = 0.0;
};

namespace detail {

// Per-feature index orders, sorted by value and then by index.
inline std::vector<std::vector<std::size_t>> feature_orders(const std::vector<Eigen::VectorXd>& samples,
                                                            const std::vector<std::size_t>& active) {
  const auto d = samples.front().size();
  std::vector<std::vector<std::size_t>> orders(static_cast<std::size_t>(d), active);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto& o = orders[static_cast<std::size_t>(j)];
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return samples[a](j) < samples[b](j); });
  }
  return orders;
}

// Exhaustive stump search. Candidate thresholds are -inf, the midpoints of
// consecutive distinct values, and +inf. Scan order: feature, threshold
// ascending, polarity +1 before -1; the first strict minimum wins.
inline StumpSearchResult best_stump(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                                    const std::vector<double>& weight,
                                    const std::vector<std::vector<std::size_t>>& orders) {
  StumpSearchResult best;
  best.error = std::numeric_limits<double>::infinity();
  double total_pos = 0.0;
  double total_neg = 0.0;
  for (std::size_t i : orders.front()) (labels[i] > 0 ? total_pos : total_neg) += weight[i];

  auto consider = [&](Eigen::Index j, double threshold, double below_pos, double below_neg) {
    // polarity +1 predicts -1 below: errors are positives below and negatives above.
    const double err_plus = below_pos + (total_neg - below_neg);
    const double err_minus = below_neg + (total_pos - below_pos);
    if (err_plus < best.error) best = {{j, threshold, 1}, err_plus};
    if (err_minus < best.error) best = {{j, threshold, -1}, err_minus};
  };

  for (std::size_t jj = 0; jj < orders.size(); ++jj) {
    const auto j = static_cast<Eigen::Index>(jj);
    const auto& order = orders[jj];
    double below_pos = 0.0;
    double below_neg = 0.0;
    consider(j, -std::numeric_limits<double>::infinity(), 0.0, 0.0);
    for (std::size_t q = 0; q < order.size(); ++q) {
      const std::size_t i = order[q];
      (labels[i] > 0 ? below_pos : below_neg) += weight[i];
      if (q + 1 < order.size()) {
        const double v = samples[i](j);
        const double next = samples[order[q + 1]](j);
        if (next > v) consider(j, v + 0.5 * (next - v), below_pos, below_neg);
      }
    }
    consider(j, std::numeric_limits<double>::infinity(), below_pos, below_neg);
  }
  return best;
}

inline AdaboostModel boost(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                           const std::vector<std::size_t>& active, int rounds) {
  AdaboostModel model;
  model.dimension = samples.front().size();
  std::vector<double> weight(samples.size(), 0.0);
  for (auto i : active) weight[i] = 1.0 / static_cast<double>(active.size());
  const auto orders = feature_orders(samples, active);
  for (int t = 0; t < rounds; ++t) {
    const auto found = best_stump(samples, labels, weight, orders);
    // Recompute the weighted error in index order so it is independent of the scan.
    double eps = 0.0;
    for (auto i : active) {
      if (found.stump.predict(samples[i]) != labels[i]) eps += weight[i];
    }
    if (eps >= 0.5 - kAdaboostEpsilonFloor) break;
    const double alpha = adaboost_alpha(eps);
    double z = 0.0;
    for (auto i : active) {
      weight[i] *= std::exp(-alpha * labels[i] * found.stump.predict(samples[i]));
      z += weight[i];
    }
    for (auto i : active) weight[i] /= z;
    model.stumps.push_back(found.stump);
    model.alphas.push_back(alpha);
    model.errors.push_back(eps);
    model.partitions.push_back(z);
    // A perfect stump leaves the distribution unchanged, so further rounds would repeat it.
    if (eps == 0.0) break;
  }
  return model;
}

}  // namespace detail

inline StumpSearchResult search_stump(const LabeledDataset& train, const std::vector<double>& weight) {
  if (train.empty()) throw ContractError("search_stump: empty dataset");
  if (weight.size() != train.size()) throw ContractError("search_stump: weight length mismatch");
  train.dimension();
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::best_stump(train.samples, train.labels, weight, detail::feature_orders(train.samples, all));
}

/// Fixed number of rounds. Training stops early when a round's weighted error
/// reaches 1/2 (the round is discarded) or 0 (kept with a capped alpha).
inline AdaboostModel train_adaboost(const LabeledDataset& train, int T) {
  if (T < 1) throw ContractError("train_adaboost: T must be positive");
  if (!train.has_both_classes()) throw ContractError("train_adaboost: both classes must be present");
  train.dimension();
  for (int y : train.labels) require_label(y);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::boost(train.samples, train.labels, all, T);
}

/// T picked from `candidates` by leave-one-out error (ties to the smaller T).
inline AdaboostModel train_adaboost_loo(const LabeledDataset& train,
                                        std::vector<int> candidates = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}) {
  if (candidates.empty()) throw ContractError("train_adaboost_loo: no candidate T");
  if (!train.has_both_classes()) throw ContractError("train_adaboost_loo: both classes must be present");
  if (train.size() < 2) throw ContractError("train_adaboost_loo: at least two samples are required");
  train.dimension();
  for (int y : train.labels) require_label(y);
  std::sort(candidates.begin(), candidates.end());
  if (candidates.front() < 1) throw ContractError("train_adaboost_loo: T must be positive");

  std::vector<std::size_t> errors(candidates.size(), 0);
  std::vector<std::size_t> rest;
  rest.reserve(train.size() - 1);
  for (std::size_t held = 0; held < train.size(); ++held) {
    rest.clear();
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (i != held) rest.push_back(i);
    }
    const auto fold = detail::boost(train.samples, train.labels, rest, candidates.back());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto prefix = static_cast<std::size_t>(candidates[c]);
      errors[c] += decision_sign(fold.decision_value(train.samples[held], prefix)) != train.labels[held];
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(errors.begin(), errors.end()) - errors.begin());
  auto model = train_adaboost(train, candidates[best]);
  model.loo_errors = std::move(errors);
  model.loo_candidates = std::move(candidates);
  return model;
}

}  // namespace fdia
