#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fdia/errors.hpp"

namespace fdia {

/// Attacked measurements are +1, secure ones -1.
inline constexpr int kAttacked = 1;
inline constexpr int kSecure = -1;

/// Cluster-partitioned samples with +/-1 labels. Learners only read
/// `samples` and `labels`; the remaining fields record provenance.
struct LabeledDataset {
  std::vector<Eigen::VectorXd> samples;
  std::vector<int> labels;
  std::size_t num_clusters = 0;
  std::vector<std::size_t> cluster_of_measurement;
  std::vector<std::size_t> sample_trial;
  std::vector<std::size_t> sample_cluster;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void push_back(Eigen::VectorXd sample, int label) {
    samples.push_back(std::move(sample));
    labels.push_back(label);
  }

  std::size_t count(int label) const {
    std::size_t n = 0;
    for (int y : labels) n += (y == label);
    return n;
  }
  bool has_both_classes() const { return count(kAttacked) > 0 && count(kSecure) > 0; }

  /// Common feature dimension; throws ContractError if samples disagree.
  Eigen::Index dimension() const {
    if (samples.empty()) throw ContractError("dataset is empty");
    const auto d = samples.front().size();
    for (const auto& s : samples) {
      if (s.size() != d) throw ContractError("dataset mixes feature dimensions");
    }
    return d;
  }

  LabeledDataset subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out;
    out.samples.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (auto i : indices) out.push_back(samples[i], labels[i]);
    return out;
  }
};

/// Builds a dataset of scalar samples, convenient for one-dimensional tests.
inline LabeledDataset make_scalar_dataset(const std::vector<double>& values, const std::vector<int>& labels) {
  if (values.size() != labels.size()) throw ContractError("values and labels differ in length");
  LabeledDataset ds;
  for (std::size_t i = 0; i < values.size(); ++i) ds.push_back(Eigen::VectorXd::Constant(1, values[i]), labels[i]);
  return ds;
}

inline void require_label(int y) {
  if (y != kAttacked && y != kSecure) throw ContractError("labels must be +1 or -1");
}

/// sign() with sign(0) = +1: only a strictly negative value is classified secure.
inline int decision_sign(double value) { return value < 0.0 ? kSecure : kAttacked; }

inline void require_dimension(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw ContractError("sample dimension " + std::to_string(got) + " does not match model dimension " +
                        std::to_string(expected));
  }
}

// --- seeding -------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Worker seeds are derived from a master seed by XOR with the worker index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) { return master ^ index; }

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

/// Stream order for the online learners: one seeded shuffle.
inline LabeledDataset shuffled(const LabeledDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto engine = make_engine(seed);
  std::shuffle(order.begin(), order.end(), engine);
  return ds.subset(order);
}

}  // namespace fdia
