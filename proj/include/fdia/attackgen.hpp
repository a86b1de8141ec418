#pragma once

// Trial generation (clean measurements plus observable or column-space
// attacks) and assembly of cluster-partitioned labeled datasets.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/dc_grid.hpp"
#include "fdia/errors.hpp"

namespace fdia {

enum class AttackKind { none, observable, unobservable };

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  Index kappa = 0;
  std::uint64_t seed = 0;
};

struct Trial {
  AttackKind kind = AttackKind::none;
  VectorXd z;        // clean (noisy) measurements
  VectorXd a;        // attack, exactly zero off the support
  VectorXd z_tilde;  // z + a
  std::vector<Index> support;
  std::vector<int> labels;
  std::optional<VectorXd> c;  // state attack, set for column-space attacks
};

struct UnobservableAttack {
  VectorXd a;
  VectorXd c;
};

/// Attempt budgets for attack construction.
inline constexpr int kMagnitudeRetries = 20;
inline constexpr int kSupportRetries = 200;
/// Support entries must satisfy |a_i| >= kMinAttackRatio * sigma_z.
inline constexpr double kMinAttackRatio = 1e-3;

namespace detail {

inline std::vector<Index> complement(const std::vector<Index>& support, Index n) {
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  for (auto i : support) in[static_cast<std::size_t>(i)] = true;
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i) {
    if (!in[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

// Orthonormal basis of {c : H_rows c = 0, 1.c = 0}, as columns.
inline MatrixXd nontrivial_null_basis(const MatrixXd& H, const std::vector<Index>& rows) {
  const Index d = H.cols();
  MatrixXd basis;
  if (rows.empty()) {
    basis = MatrixXd::Identity(d, d);
  } else {
    MatrixXd sub(static_cast<Index>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Index>(r)) = H.row(rows[r]);
    Eigen::JacobiSVD<MatrixXd> svd(sub, Eigen::ComputeFullV);
    svd.setThreshold(1e-10);
    const Index rank = svd.rank();
    basis = svd.matrixV().rightCols(d - rank);
  }
  if (basis.cols() == 0) return basis;
  // Remove the uniform angle shift, which H maps to zero.
  const VectorXd ones = VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  basis -= ones * (ones.transpose() * basis);
  Eigen::JacobiSVD<MatrixXd> svd(basis, Eigen::ComputeThinU);
  Index keep = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i) keep += svd.singularValues()(i) > 1e-8;
  return svd.matrixU().leftCols(keep);
}
}  // namespace detail

/// Builds a = H c that vanishes off `support`, scaled so that the sample
/// standard deviation of its support entries is `target_std`.
template <class Engine>
UnobservableAttack make_unobservable_attack(const DcModel& model, std::vector<Index> support, double target_std,
                                            Engine& engine) {
  const Index n = model.num_measurements();
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  if (support.empty()) throw ContractError("make_unobservable_attack: empty support");
  if (support.back() >= n || support.front() < 0) throw ContractError("make_unobservable_attack: index out of range");
  if (!(target_std > 0.0)) throw ContractError("make_unobservable_attack: target_std must be positive");

  const auto outside = detail::complement(support, n);
  const MatrixXd basis = detail::nontrivial_null_basis(model.H, outside);
  if (basis.cols() == 0) {
    throw InfeasibleAttackError("no nontrivial state attack vanishes on the " + std::to_string(outside.size()) +
                                " unattacked measurements");
  }
  for (auto i : support) {
    const double reach = (model.H.row(i) * basis).norm();
    if (reach <= 1e-9 * model.H.row(i).norm()) {
      throw InfeasibleAttackError("measurement " + std::to_string(i) +
                                  " is forced to zero by the unattacked measurements");
    }
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < kMagnitudeRetries; ++attempt) {
    VectorXd g(basis.cols());
    for (Index k = 0; k < g.size(); ++k) g(k) = normal(engine);
    VectorXd c = basis * g;
    const VectorXd full = model.H * c;

    VectorXd on_support(static_cast<Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) on_support(static_cast<Index>(k)) = full(support[k]);
    double spread = detail::sample_std(on_support);
    if (!(spread > 0.0)) spread = on_support.norm() / std::sqrt(static_cast<double>(on_support.size()));
    if (!(spread > 0.0)) continue;
    const double scale = target_std / spread;

    UnobservableAttack out{VectorXd::Zero(n), c * scale};
    bool large_enough = true;
    for (std::size_t k = 0; k < support.size(); ++k) {
      const double v = on_support(static_cast<Index>(k)) * scale;
      out.a(support[k]) = v;
      large_enough = large_enough && std::abs(v) >= kMinAttackRatio * target_std;
    }
    if (large_enough) return out;
  }
  std::string listing;
  for (auto i : support) listing += (listing.empty() ? "" : ",") + std::to_string(i);
  throw GenerationError("attack magnitude retries exhausted for support {" + listing + "}");
}

/// Draws a support of size kappa on which a column-space attack with every
/// support entry nonzero exists. Unattacked rows are added in random order;
/// each addition pulls in every row its span forces to zero, and additions
/// that would overshoot N - kappa zeros or exhaust the nontrivial null space
/// are skipped.
template <class Engine>
std::vector<Index> draw_unobservable_support(const DcModel& model, Index kappa, Engine& engine) {
  const Index n = model.num_measurements();
  const Index d = model.num_states();
  if (kappa < 1 || kappa > n) throw ContractError("draw_unobservable_support: kappa out of range");
  const Index zeros_wanted = n - kappa;
  std::vector<Index> all(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  if (zeros_wanted == 0) return all;

  VectorXd row_norm2(n);
  for (Index i = 0; i < n; ++i) row_norm2(i) = model.H.row(i).squaredNorm();
  constexpr double rel_tol2 = 1e-18;

  for (int attempt = 0; attempt < kSupportRetries; ++attempt) {
    MatrixXd residual = model.H;
    std::vector<bool> zero(static_cast<std::size_t>(n), false);
    Index zero_count = 0;
    Index rank = 0;
    auto order = all;
    std::shuffle(order.begin(), order.end(), engine);

    for (Index candidate : order) {
      if (zero_count == zeros_wanted || rank >= d - 2) break;
      if (zero[static_cast<std::size_t>(candidate)]) continue;
      const VectorXd q = residual.row(candidate).transpose().normalized();

      std::vector<Index> joined;
      for (Index j = 0; j < n; ++j) {
        if (zero[static_cast<std::size_t>(j)]) continue;
        const double along = residual.row(j).dot(q);
        const double left = (residual.row(j) - along * q.transpose()).squaredNorm();
        if (j == candidate || left <= rel_tol2 * row_norm2(j)) joined.push_back(j);
      }
      if (zero_count + static_cast<Index>(joined.size()) > zeros_wanted) continue;

      for (Index j = 0; j < n; ++j) {
        if (zero[static_cast<std::size_t>(j)]) continue;
        residual.row(j) -= residual.row(j).dot(q) * q.transpose();
      }
      for (Index j : joined) {
        zero[static_cast<std::size_t>(j)] = true;
        residual.row(j).setZero();
      }
      zero_count += static_cast<Index>(joined.size());
      ++rank;
    }
    if (zero_count == zeros_wanted) {
      std::vector<Index> support;
      for (Index i = 0; i < n; ++i) {
        if (!zero[static_cast<std::size_t>(i)]) support.push_back(i);
      }
      return support;
    }
  }
  throw GenerationError("no feasible column-space attack support of size " + std::to_string(kappa) + " found in " +
                        std::to_string(kSupportRetries) + " attempts");
}

inline void validate_spec(const DcModel& model, const AttackSpec& spec) {
  const Index n = model.num_measurements();
  if (spec.kappa < 0 || spec.kappa > n) throw ContractError("attack kappa out of range [0, N]");
  switch (spec.kind) {
    case AttackKind::none:
      if (spec.kappa != 0) throw ContractError("kind=none requires kappa = 0");
      break;
    case AttackKind::observable:
      if (spec.kappa < 1) throw ContractError("observable attacks need kappa >= 1");
      break;
    case AttackKind::unobservable:
      if (spec.kappa < model.kappa_star()) throw ContractError("unobservable attacks need kappa >= N - D + 1");
      break;
  }
}

inline Trial generate_trial(const DcModel& model, const AttackSpec& spec) {
  validate_spec(model, spec);
  const Index n = model.num_measurements();
  auto engine = make_engine(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Trial trial;
  trial.kind = spec.kind;
  trial.z = model.clean_measurements();
  for (Index i = 0; i < n; ++i) trial.z(i) += model.noise_std(i) * normal(engine);
  const double mu_z = trial.z.mean();
  const double sigma_z = detail::sample_std(trial.z);
  trial.a = VectorXd::Zero(n);

  if (spec.kind == AttackKind::observable) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index k = 0; k < spec.kappa; ++k) {
      std::uniform_int_distribution<Index> pick(k, n - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(engine))]);
    }
    trial.support.assign(pool.begin(), pool.begin() + spec.kappa);
    std::sort(trial.support.begin(), trial.support.end());
    std::normal_distribution<double> attack(mu_z, sigma_z);
    for (auto i : trial.support) {
      double v = 0.0;
      do {
        v = attack(engine);
      } while (std::abs(v) < kMinAttackRatio * sigma_z);
      trial.a(i) = v;
    }
  } else if (spec.kind == AttackKind::unobservable) {
    std::optional<UnobservableAttack> found;
    std::string last_error;
    for (int attempt = 0; attempt < kSupportRetries && !found; ++attempt) {
      auto support = draw_unobservable_support(model, spec.kappa, engine);
      try {
        found = make_unobservable_attack(model, support, sigma_z, engine);
        trial.support = std::move(support);
      } catch (const GenerationError& e) {
        last_error = e.what();
      }
    }
    if (!found) throw GenerationError("unobservable attack generation failed: " + last_error);
    trial.a = found->a;
    trial.c = found->c;
  }

  trial.z_tilde = trial.z + trial.a;
  trial.labels.assign(static_cast<std::size_t>(n), kSecure);
  for (auto i : trial.support) trial.labels[static_cast<std::size_t>(i)] = kAttacked;
  return trial;
}

/// Contiguous clusters with sizes differing by at most one, larger ones first.
inline std::vector<std::size_t> contiguous_clusters(std::size_t n, std::size_t groups) {
  if (groups == 0 || groups > n) throw ContractError("cluster count must lie in [1, N]");
  std::vector<std::size_t> cluster(n);
  const std::size_t base = n / groups;
  const std::size_t extra = n % groups;
  std::size_t index = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) cluster[index++] = g;
  }
  return cluster;
}

/// Each (trial, cluster) pair becomes one sample of the cluster's observed
/// measurements, labeled attacked if any of its measurements is attacked.
inline LabeledDataset assemble_dataset(const std::vector<Trial>& trials, std::size_t groups) {
  if (trials.empty()) throw ContractError("assemble_dataset: no trials");
  const auto n = static_cast<std::size_t>(trials.front().z_tilde.size());
  LabeledDataset ds;
  ds.num_clusters = groups;
  ds.cluster_of_measurement = contiguous_clusters(n, groups);

  std::vector<std::vector<Index>> members(groups);
  for (std::size_t i = 0; i < n; ++i) members[ds.cluster_of_measurement[i]].push_back(static_cast<Index>(i));

  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto& trial = trials[t];
    if (static_cast<std::size_t>(trial.z_tilde.size()) != n) throw ContractError("trials come from different models");
    for (std::size_t g = 0; g < groups; ++g) {
      VectorXd sample(static_cast<Index>(members[g].size()));
      int label = kSecure;
      for (std::size_t k = 0; k < members[g].size(); ++k) {
        const auto i = members[g][k];
        sample(static_cast<Index>(k)) = trial.z_tilde(i);
        if (trial.labels[static_cast<std::size_t>(i)] == kAttacked) label = kAttacked;
      }
      ds.push_back(std::move(sample), label);
      ds.sample_trial.push_back(t);
      ds.sample_cluster.push_back(g);
    }
  }
  return ds;
}

struct SeparationStats {
  double within_attacked = 0.0;
  double within_secure = 0.0;
  double cross = 0.0;
  bool sampled = false;
};

inline constexpr std::size_t kMaxExactPairs = 1'000'000;

/// Mean pairwise Euclidean distances within each class and across classes.
/// Exact when each pair family has at most kMaxExactPairs pairs, otherwise
/// estimated from kMaxExactPairs pairs drawn with `seed`.
inline SeparationStats separation_stats(const LabeledDataset& ds, std::uint64_t seed = 0) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.labels[i] == kAttacked ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DiagnosticError("separation_stats needs both classes");

  auto dist = [&](std::size_t i, std::size_t j) { return (ds.samples[i] - ds.samples[j]).norm(); };
  auto engine = make_engine(seed);
  SeparationStats out;

  auto within = [&](const std::vector<std::size_t>& idx) {
    const std::size_t m = idx.size();
    if (m < 2) return 0.0;
    const std::size_t pairs = m * (m - 1) / 2;
    double sum = 0.0;
    if (pairs <= kMaxExactPairs) {
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) sum += dist(idx[a], idx[b]);
      }
      return sum / static_cast<double>(pairs);
    }
    out.sampled = true;
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    for (std::size_t s = 0; s < kMaxExactPairs; ++s) {
      std::size_t a = pick(engine);
      std::size_t b = pick(engine);
      while (b == a) b = pick(engine);
      sum += dist(idx[a], idx[b]);
    }
    return sum / static_cast<double>(kMaxExactPairs);
  };

  out.within_attacked = within(pos);
  out.within_secure = within(neg);
  const std::size_t cross_pairs = pos.size() * neg.size();
  double sum = 0.0;
  if (cross_pairs <= kMaxExactPairs) {
    for (auto i : pos) {
      for (auto j : neg) sum += dist(i, j);
    }
    out.cross = sum / static_cast<double>(cross_pairs);
  } else {
    out.sampled = true;
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, neg.size() - 1);
    for (std::size_t s = 0; s < kMaxExactPairs; ++s) sum += dist(pos[pick_pos(engine)], neg[pick_neg(engine)]);
    out.cross = sum / static_cast<double>(kMaxExactPairs);
  }
  return out;
}

/// One row per sample: trial id, cluster id, label, features.
inline void write_dataset_csv(std::ostream& out, const LabeledDataset& ds) {
  std::size_t width = 0;
  for (const auto& s : ds.samples) width = std::max(width, static_cast<std::size_t>(s.size()));
  out << "trial,cluster,label";
  for (std::size_t k = 0; k < width; ++k) out << ",f" << k;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (i < ds.sample_trial.size() ? ds.sample_trial[i] : 0) << ','
        << (i < ds.sample_cluster.size() ? ds.sample_cluster[i] : i) << ',' << ds.labels[i];
    for (Index k = 0; k < ds.samples[i].size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.samples[i](k));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace fdia
