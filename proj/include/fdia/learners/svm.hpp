#pragma once

// Soft-margin SVM trained in the dual by SMO with second-order working set
// selection, plus cross-validated grid search over (C, sigma).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"

namespace fdia {

enum class KernelKind { linear, gaussian };

struct KernelDescriptor {
  KernelKind kind = KernelKind::linear;
  double sigma = 1.0;  // gaussian width

  static KernelDescriptor linear() { return {KernelKind::linear, 1.0}; }
  static KernelDescriptor gaussian(double sigma) {
    if (!(sigma > 0.0)) throw ContractError("gaussian kernel width must be positive");
    return {KernelKind::gaussian, sigma};
  }

  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    if (kind == KernelKind::linear) return a.dot(b);
    return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
  }

  friend bool operator==(const KernelDescriptor&, const KernelDescriptor&) = default;
};

inline Eigen::MatrixXd gram_matrix(std::span<const Eigen::VectorXd> samples, const KernelDescriptor& kernel) {
  const auto m = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd K(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = K(j, i) = kernel(samples[static_cast<std::size_t>(i)], samples[static_cast<std::size_t>(j)]);
    }
  }
  return K;
}

struct SmoOptions {
  double tolerance = 1e-3;       // maximal KKT violation at termination
  std::size_t max_iterations = 0;  // 0 selects max(1e5, 100 * M)
  bool record_trace = false;
  bool shrinking = true;  // ignored while recording a trace
};

struct SmoSolution {
  Eigen::VectorXd beta;
  double bias = 0.0;
  double dual_objective = 0.0;  // sum(beta) - 1/2 beta^T Q beta
  std::size_t iterations = 0;
  double kkt_violation = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Maximizes sum(beta) - 1/2 sum_ij beta_i beta_j y_i y_j K_ij subject to
/// sum(beta_i y_i) = 0 and 0 <= beta_i <= upper_i. Never throws on the
/// iteration cap; check `converged`. A warm start must be feasible.
inline SmoSolution solve_smo(const Eigen::MatrixXd& K, std::span<const int> y, std::span<const double> upper,
                             const SmoOptions& options = {}, const Eigen::VectorXd* warm_start = nullptr) {
  const auto m = static_cast<Eigen::Index>(y.size());
  if (K.rows() != m || K.cols() != m || upper.size() != y.size()) {
    throw ContractError("solve_smo: inconsistent problem dimensions");
  }
  const std::size_t cap = options.max_iterations ? options.max_iterations
                                                 : std::max<std::size_t>(100000, 100 * static_cast<std::size_t>(m));
  constexpr double tau = 1e-12;

  SmoSolution sol;
  sol.beta = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd& beta = sol.beta;
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(m, -1.0);  // gradient of 1/2 b'Qb - e'b
  if (warm_start) {
    if (warm_start->size() != m) throw ContractError("solve_smo: warm start has the wrong length");
    beta = *warm_start;
    Eigen::VectorXd yv(m);
    for (Eigen::Index t = 0; t < m; ++t) yv(t) = y[static_cast<std::size_t>(t)];
    const Eigen::VectorXd yb = yv.cwiseProduct(beta);
    grad = yv.cwiseProduct(K * yb) - Eigen::VectorXd::Ones(m);
  }

  auto yd = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
  auto cap_of = [&](Eigen::Index i) { return upper[static_cast<std::size_t>(i)]; };
  auto objective = [&] { return -0.5 * beta.dot(grad - Eigen::VectorXd::Ones(m)); };

  Eigen::VectorXd yvec(m);
  for (Eigen::Index t = 0; t < m; ++t) yvec(t) = yd(t);
  const Eigen::VectorXd diag = K.diagonal();
  // Membership of the index sets I_up and I_low, refreshed when beta changes.
  std::vector<char> in_up(static_cast<std::size_t>(m));
  std::vector<char> in_low(static_cast<std::size_t>(m));
  auto refresh = [&](Eigen::Index t) {
    const bool pos = y[static_cast<std::size_t>(t)] > 0;
    in_up[static_cast<std::size_t>(t)] = pos ? beta(t) < cap_of(t) : beta(t) > 0.0;
    in_low[static_cast<std::size_t>(t)] = pos ? beta(t) > 0.0 : beta(t) < cap_of(t);
  };
  for (Eigen::Index t = 0; t < m; ++t) refresh(t);

  if (options.record_trace) sol.objective_trace.push_back(objective());

  // Shrinking: variables stuck at a bound are dropped from the working set
  // and their gradients rebuilt before the final optimality check.
  const bool shrinking = options.shrinking && !options.record_trace;
  std::vector<Eigen::Index> active(static_cast<std::size_t>(m));
  for (Eigen::Index t = 0; t < m; ++t) active[static_cast<std::size_t>(t)] = t;
  bool unshrunk = false;
  const Eigen::Index shrink_period = std::min<Eigen::Index>(m, 1000);
  Eigen::Index countdown = shrink_period;
  auto reconstruct = [&] {
    if (static_cast<Eigen::Index>(active.size()) == m) return;
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);
    for (auto t : active) is_active[static_cast<std::size_t>(t)] = 1;
    const Eigen::VectorXd yb = yvec.cwiseProduct(beta);
    for (Eigen::Index t = 0; t < m; ++t) {
      if (!is_active[static_cast<std::size_t>(t)]) grad(t) = yvec(t) * K.col(t).dot(yb) - 1.0;
    }
    active.resize(static_cast<std::size_t>(m));
    for (Eigen::Index t = 0; t < m; ++t) active[static_cast<std::size_t>(t)] = t;
  };
  auto shrink = [&] {
    double gmax1 = -std::numeric_limits<double>::infinity();  // max over I_up of -y g
    double gmax2 = -std::numeric_limits<double>::infinity();  // max over I_low of y g
    for (auto t : active) {
      if (in_up[static_cast<std::size_t>(t)]) gmax1 = std::max(gmax1, -yvec(t) * grad(t));
      if (in_low[static_cast<std::size_t>(t)]) gmax2 = std::max(gmax2, yvec(t) * grad(t));
    }
    if (!unshrunk && gmax1 + gmax2 <= 10.0 * options.tolerance) {
      unshrunk = true;
      reconstruct();
    }
    std::vector<Eigen::Index> kept;
    kept.reserve(active.size());
    for (auto t : active) {
      bool drop = false;
      const bool pos = y[static_cast<std::size_t>(t)] > 0;
      if (beta(t) >= cap_of(t)) {
        drop = pos ? -grad(t) > gmax1 : -grad(t) > gmax2;
      } else if (beta(t) <= 0.0) {
        drop = pos ? grad(t) > gmax2 : grad(t) > gmax1;
      }
      if (!drop) kept.push_back(t);
    }
    active.swap(kept);
  };

  std::size_t iter = 0;
  double violation = 0.0;
  const double* yp = yvec.data();
  while (true) {
    if (shrinking && --countdown == 0) {
      countdown = shrink_period;
      shrink();
    }
    const double* g = grad.data();
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (auto t : active) {
      if (!in_up[static_cast<std::size_t>(t)]) continue;
      const double v = -yp[t] * g[t];
      if (v >= gmax) {
        gmax = v;
        i = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    if (i >= 0) {
      const double* ki = K.col(i).data();
      const double kii = diag(i);
      double best = std::numeric_limits<double>::infinity();
      for (auto t : active) {
        if (!in_low[static_cast<std::size_t>(t)]) continue;
        const double v = -yp[t] * g[t];
        gmin = std::min(gmin, v);
        if (v < gmax) {
          const double b = gmax - v;
          double a = kii + diag(t) - 2.0 * ki[t];
          if (a <= 0.0) a = tau;
          const double score = -(b * b) / a;
          if (score <= best) {
            best = score;
            j = t;
          }
        }
      }
    }
    violation = (i < 0 || !std::isfinite(gmin)) ? 0.0 : gmax - gmin;
    if (violation < options.tolerance || j < 0) {
      if (static_cast<Eigen::Index>(active.size()) < m) {
        // Converged on the working set; recheck with every variable.
        reconstruct();
        countdown = 1 + shrink_period;
        continue;
      }
      sol.converged = true;
      break;
    }
    if (iter >= cap) break;
    ++iter;

    // Two-variable subproblem, following the LIBSVM update.
    const double ci = cap_of(i);
    const double cj = cap_of(j);
    const double old_i = beta(i);
    const double old_j = beta(j);
    const double qij = yd(i) * yd(j) * K(j, i);
    if (y[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(j)]) {
      double quad = diag(i) + diag(j) + 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = beta(i) - beta(j);
      beta(i) += delta;
      beta(j) += delta;
      if (diff > 0.0) {
        if (beta(j) < 0.0) { beta(j) = 0.0; beta(i) = diff; }
      } else {
        if (beta(i) < 0.0) { beta(i) = 0.0; beta(j) = -diff; }
      }
      if (diff > ci - cj) {
        if (beta(i) > ci) { beta(i) = ci; beta(j) = ci - diff; }
      } else {
        if (beta(j) > cj) { beta(j) = cj; beta(i) = cj + diff; }
      }
    } else {
      double quad = diag(i) + diag(j) - 2.0 * qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = beta(i) + beta(j);
      beta(i) -= delta;
      beta(j) += delta;
      if (sum > ci) {
        if (beta(i) > ci) { beta(i) = ci; beta(j) = sum - ci; }
      } else {
        if (beta(j) < 0.0) { beta(j) = 0.0; beta(i) = sum; }
      }
      if (sum > cj) {
        if (beta(j) > cj) { beta(j) = cj; beta(i) = sum - cj; }
      } else {
        if (beta(i) < 0.0) { beta(i) = 0.0; beta(j) = sum; }
      }
    }
    const double di = (beta(i) - old_i) * yd(i);
    const double dj = (beta(j) - old_j) * yd(j);
    if (static_cast<Eigen::Index>(active.size()) == m) {
      grad.array() += yvec.array() * (K.col(i).array() * di + K.col(j).array() * dj);
    } else {
      const double* ki = K.col(i).data();
      const double* kj = K.col(j).data();
      for (auto t : active) grad(t) += yp[t] * (ki[t] * di + kj[t] * dj);
    }
    refresh(i);
    refresh(j);
    if (options.record_trace) sol.objective_trace.push_back(objective());
  }
  if (!sol.converged) reconstruct();
  sol.iterations = iter;
  sol.kkt_violation = violation;
  sol.dual_objective = objective();

  // Decision value f(x) = sum beta_i y_i k(x_i, x) + bias.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < m; ++t) {
    const double yg = yd(t) * grad(t);
    if (beta(t) >= cap_of(t)) {
      if (yd(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (beta(t) <= 0.0) {
      if (yd(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  double rho = 0.0;
  if (free_count > 0) {
    rho = free_sum / free_count;
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    rho = 0.5 * (ub + lb);
  } else if (std::isfinite(ub)) {
    rho = ub;
  } else if (std::isfinite(lb)) {
    rho = lb;
  }
  sol.bias = -rho;
  return sol;
}

/// Trained kernel SVM. Only samples with beta_i > 0 are kept.
struct SvmModel {
  std::vector<std::size_t> support_indices;  // positions in the training set
  std::vector<Eigen::VectorXd> support_vectors;
  std::vector<int> support_labels;
  std::vector<double> beta;
  double bias = 0.0;
  KernelDescriptor kernel;
  double C = 1.0;
  Eigen::Index dimension = 0;
  double dual_objective = 0.0;

  double decision_value(const Eigen::VectorXd& s) const {
    require_dimension(dimension, s.size());
    double f = bias;
    for (std::size_t k = 0; k < beta.size(); ++k) f += beta[k] * support_labels[k] * kernel(support_vectors[k], s);
    return f;
  }
  int predict(const Eigen::VectorXd& s) const { return decision_sign(decision_value(s)); }

  /// Primal weights; only meaningful for the linear kernel.
  Eigen::VectorXd linear_weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dimension);
    for (std::size_t k = 0; k < beta.size(); ++k) w += beta[k] * support_labels[k] * support_vectors[k];
    return w;
  }
};

namespace detail {

inline SvmModel assemble_svm(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                             const SmoSolution& sol, const KernelDescriptor& kernel, double C) {
  SvmModel model;
  model.kernel = kernel;
  model.C = C;
  model.bias = sol.bias;
  model.dimension = samples.empty() ? 0 : samples.front().size();
  model.dual_objective = sol.dual_objective;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (sol.beta(static_cast<Eigen::Index>(i)) > 0.0) {
      model.support_indices.push_back(i);
      model.support_vectors.push_back(samples[i]);
      model.support_labels.push_back(labels[i]);
      model.beta.push_back(sol.beta(static_cast<Eigen::Index>(i)));
    }
  }
  return model;
}

}  // namespace detail

/// Per-sample box constraints 0 <= beta_i <= upper_i. Throws TrainingError
/// if SMO hits its iteration cap.
inline SvmModel train_svm_weighted(const std::vector<Eigen::VectorXd>& samples, const std::vector<int>& labels,
                                   const std::vector<double>& upper, const KernelDescriptor& kernel,
                                   const SmoOptions& options = {}, SmoSolution* solution_out = nullptr) {
  const Eigen::MatrixXd K = gram_matrix(samples, kernel);
  auto sol = solve_smo(K, labels, upper, options);
  if (!sol.converged) {
    throw TrainingError("SMO stopped at the iteration cap with KKT violation " + std::to_string(sol.kkt_violation));
  }
  auto model = detail::assemble_svm(samples, labels, sol, kernel, upper.empty() ? 0.0 : upper.front());
  if (solution_out) *solution_out = std::move(sol);
  return model;
}

inline SvmModel train_svm(const LabeledDataset& train, double C, const KernelDescriptor& kernel,
                          const SmoOptions& options = {}, SmoSolution* solution_out = nullptr) {
  if (!(C > 0.0)) throw ContractError("train_svm: C must be positive");
  if (!train.has_both_classes()) throw ContractError("train_svm: both classes must be present");
  train.dimension();
  for (int y : train.labels) require_label(y);
  const std::vector<double> upper(train.size(), C);
  auto model = train_svm_weighted(train.samples, train.labels, upper, kernel, options, solution_out);
  model.C = C;
  return model;
}

struct GridSearchResult {
  double C = 1.0;
  double sigma = 1.0;
  double cv_accuracy = 0.0;
  std::size_t points_evaluated = 0;
};

struct GridSearchOptions {
  int folds = 5;
  int log2_min = -10;
  int log2_max = 10;
};

/// Cross-validated accuracy over log2(C) (and log2(sigma) for the gaussian
/// kernel) in integer steps. Folds are assigned round-robin by sample index.
/// Ties go to the smaller C, then the smaller sigma.
inline GridSearchResult grid_search_svm(const LabeledDataset& train, KernelKind kind,
                                        const GridSearchOptions& options = {}) {
  if (options.folds < 2) throw ContractError("grid_search_svm: at least two folds are required");
  if (train.size() < static_cast<std::size_t>(options.folds)) throw ContractError("grid_search_svm: fewer samples than folds");
  train.dimension();

  const auto m = train.size();
  std::vector<std::vector<std::size_t>> fold_train(static_cast<std::size_t>(options.folds));
  std::vector<std::vector<std::size_t>> fold_test(static_cast<std::size_t>(options.folds));
  for (std::size_t i = 0; i < m; ++i) {
    for (int f = 0; f < options.folds; ++f) {
      (static_cast<int>(i % static_cast<std::size_t>(options.folds)) == f ? fold_test : fold_train)[static_cast<std::size_t>(f)]
          .push_back(i);
    }
  }

  std::vector<double> sigmas;
  if (kind == KernelKind::gaussian) {
    for (int e = options.log2_min; e <= options.log2_max; ++e) sigmas.push_back(std::ldexp(1.0, e));
  } else {
    sigmas.push_back(1.0);
  }

  GridSearchResult best;
  best.cv_accuracy = -1.0;
  // accuracy[c][s]
  std::vector<std::vector<double>> accuracy(static_cast<std::size_t>(options.log2_max - options.log2_min + 1),
                                            std::vector<double>(sigmas.size(), 0.0));
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    const auto kernel = kind == KernelKind::gaussian ? KernelDescriptor::gaussian(sigmas[s]) : KernelDescriptor::linear();
    const Eigen::MatrixXd full = gram_matrix(train.samples, kernel);
    for (int f = 0; f < options.folds; ++f) {
      const auto& tr = fold_train[static_cast<std::size_t>(f)];
      const auto& te = fold_test[static_cast<std::size_t>(f)];
      const auto mt = static_cast<Eigen::Index>(tr.size());
      Eigen::MatrixXd K(mt, mt);
      std::vector<int> y(tr.size());
      for (Eigen::Index a = 0; a < mt; ++a) {
        y[static_cast<std::size_t>(a)] = train.labels[tr[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < mt; ++b) {
          K(a, b) = full(static_cast<Eigen::Index>(tr[static_cast<std::size_t>(a)]),
                         static_cast<Eigen::Index>(tr[static_cast<std::size_t>(b)]));
        }
      }
      const bool single_class = std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); });
      Eigen::VectorXd previous;
      for (int ce = options.log2_min; ce <= options.log2_max; ++ce) {
        std::size_t correct = 0;
        if (single_class) {
          for (auto t : te) correct += train.labels[t] == y.front();
        } else {
          // C grows along the loop, so the previous solution stays feasible.
          const std::vector<double> upper(tr.size(), std::ldexp(1.0, ce));
          const auto sol = solve_smo(K, y, upper, {}, previous.size() ? &previous : nullptr);
          previous = sol.beta;
          for (auto t : te) {
            double value = sol.bias;
            for (Eigen::Index a = 0; a < mt; ++a) {
              const double b = sol.beta(a);
              if (b > 0.0) value += b * y[static_cast<std::size_t>(a)] * full(static_cast<Eigen::Index>(t),
                                                                              static_cast<Eigen::Index>(tr[static_cast<std::size_t>(a)]));
            }
            correct += decision_sign(value) == train.labels[t];
          }
        }
        accuracy[static_cast<std::size_t>(ce - options.log2_min)][s] += static_cast<double>(correct);
      }
    }
  }
  for (int ce = options.log2_min; ce <= options.log2_max; ++ce) {
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      const double acc = accuracy[static_cast<std::size_t>(ce - options.log2_min)][s] / static_cast<double>(m);
      ++best.points_evaluated;
      if (acc > best.cv_accuracy) {
        best.cv_accuracy = acc;
        best.C = std::ldexp(1.0, ce);
        best.sigma = sigmas[s];
      }
    }
  }
  return best;
}

}  // namespace fdia
