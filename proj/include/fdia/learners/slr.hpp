#pragma once

// l1-regularized (sparse) logistic regression solved by ADMM on the split
// w - r = 0. The bias is unpenalized.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"

namespace fdia {

struct SlrModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double lambda = 0.0;
  double lambda_max = 0.0;
  int iterations = 0;
  bool converged = false;  // false means the iteration cap was hit
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double primal_tolerance = 0.0;
  double dual_tolerance = 0.0;

  double decision_value(const Eigen::VectorXd& s) const {
    require_dimension(w.size(), s.size());
    return w.dot(s) + b;
  }
  int predict(const Eigen::VectorXd& s) const { return decision_sign(decision_value(s)); }
};

struct AdmmOptions {
  double abs_tol = 1e-4;
  double rel_tol = 1e-2;
  double rho = 1.0;
  int max_iterations = 10000;
  bool adaptive_rho = true;
};

namespace detail {

// log(1 + exp(-m)) without overflow.
inline double logistic_loss(double m) { return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
inline double logistic_tail(double m) {
  if (m > 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

inline double soft_threshold(double v, double t) { return std::copysign(std::max(std::abs(v) - t, 0.0), v); }

// Stacks samples as rows with a trailing column of ones.
inline Eigen::MatrixXd design_with_bias(const LabeledDataset& ds) {
  const auto d = ds.dimension();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(ds.size()), d + 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)).head(d) = ds.samples[i].transpose();
    X(static_cast<Eigen::Index>(i), d) = 1.0;
  }
  return X;
}

inline Eigen::VectorXd label_vector(const LabeledDataset& ds) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    require_label(ds.labels[i]);
    y(static_cast<Eigen::Index>(i)) = ds.labels[i];
  }
  return y;
}

inline double logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd margin = y.cwiseProduct(X * theta);
  double f = 0.0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) f += logistic_loss(margin(i));
  return f;
}

// Minimizes sum logistic + (penalty/2) ||theta_w - v||^2 by damped Newton;
// the last coordinate of theta (the bias) carries no penalty.
inline void penalized_newton(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& v,
                             double penalty, Eigen::VectorXd& theta) {
  const auto p = theta.size();
  const auto d = p - 1;
  auto value = [&](const Eigen::VectorXd& t) {
    return logistic_objective(X, y, t) + 0.5 * penalty * (t.head(d) - v).squaredNorm();
  };
  double current = value(theta);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd margin = y.cwiseProduct(X * theta);
    Eigen::VectorXd weight(margin.size());
    Eigen::VectorXd coeff(margin.size());
    for (Eigen::Index i = 0; i < margin.size(); ++i) {
      const double q = logistic_tail(margin(i));
      coeff(i) = -y(i) * q;
      weight(i) = q * (1.0 - q);
    }
    Eigen::VectorXd grad = X.transpose() * coeff;
    grad.head(d) += penalty * (theta.head(d) - v);
    if (grad.norm() <= 1e-12 * (1.0 + std::abs(current))) break;
    Eigen::MatrixXd hess = X.transpose() * weight.asDiagonal() * X;
    hess.diagonal().head(d).array() += penalty;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    Eigen::VectorXd trial = theta - step;
    double next = value(trial);
    while (next > current - 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      trial = theta - t * step;
      next = value(trial);
    }
    if (!(next <= current)) break;
    const bool done = current - next <= 1e-15 * (1.0 + std::abs(current));
    theta = trial;
    current = next;
    if (done) break;
  }
}

}  // namespace detail

/// Critical penalty above which the l1 solution is w = 0: the sup-norm of the
/// loss gradient in w at w = 0 with the optimal intercept log(M+/M-).
inline double slr_lambda_max(const LabeledDataset& train) {
  if (!train.has_both_classes()) throw ContractError("slr_lambda_max: both classes must be present");
  const auto d = train.dimension();
  const double pos = static_cast<double>(train.count(kAttacked));
  const double neg = static_cast<double>(train.count(kSecure));
  const double total = pos + neg;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < train.size(); ++i) {
    // y_i * sigmoid(-y_i b*) is neg/M for positives and -pos/M for negatives.
    g += (train.labels[i] == kAttacked ? neg / total : -pos / total) * train.samples[i];
  }
  return g.lpNorm<Eigen::Infinity>();
}

/// The alternative rule ||H^T z_tilde||_inf, for experiments that want the
/// penalty scale tied to the measurement model instead of the training set.
inline double slr_lambda_max_from_measurements(const Eigen::MatrixXd& H, const Eigen::VectorXd& z_tilde) {
  if (H.rows() != z_tilde.size()) throw ContractError("slr_lambda_max_from_measurements: size mismatch");
  return (H.transpose() * z_tilde).lpNorm<Eigen::Infinity>();
}

inline SlrModel train_slr_lambda(const LabeledDataset& train, double lambda, const AdmmOptions& options = {}) {
  if (!train.has_both_classes()) throw ContractError("train_slr: both classes must be present");
  if (!(lambda >= 0.0)) throw ContractError("train_slr: lambda must be nonnegative");
  const Eigen::MatrixXd X = detail::design_with_bias(train);
  const Eigen::VectorXd y = detail::label_vector(train);
  const auto d = X.cols() - 1;
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  SlrModel model;
  model.lambda = lambda;
  model.lambda_max = slr_lambda_max(train);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  double rho = options.rho;

  for (int it = 1; it <= options.max_iterations; ++it) {
    detail::penalized_newton(X, y, r - u, rho, theta);
    const Eigen::VectorXd r_old = r;
    const Eigen::VectorXd wu = theta.head(d) + u;
    for (Eigen::Index j = 0; j < d; ++j) r(j) = detail::soft_threshold(wu(j), lambda / rho);
    u += theta.head(d) - r;

    model.iterations = it;
    model.primal_residual = (theta.head(d) - r).norm();
    model.dual_residual = rho * (r - r_old).norm();
    model.primal_tolerance = sqrt_d * options.abs_tol + options.rel_tol * std::max(theta.head(d).norm(), r.norm());
    model.dual_tolerance = sqrt_d * options.abs_tol + options.rel_tol * rho * u.norm();
    if (model.primal_residual <= model.primal_tolerance && model.dual_residual <= model.dual_tolerance) {
      model.converged = true;
      break;
    }
    if (options.adaptive_rho) {
      if (model.primal_residual > 10.0 * model.dual_residual) {
        rho *= 2.0;
        u /= 2.0;
      } else if (model.dual_residual > 10.0 * model.primal_residual) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }

  // Report the sparse iterate and refit the free bias against it.
  model.w = r;
  Eigen::VectorXd bias_only = Eigen::VectorXd::Zero(1);
  bias_only(0) = theta(d);
  const Eigen::VectorXd offset = X.leftCols(d) * r;
  for (int it = 0; it < 100; ++it) {
    double g = 0.0;
    double h = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double q = detail::logistic_tail(y(i) * (offset(i) + bias_only(0)));
      g -= y(i) * q;
      h += q * (1.0 - q);
    }
    if (std::abs(g) <= 1e-12 || h <= 0.0) break;
    const double step = std::clamp(g / h, -4.0, 4.0);
    bias_only(0) -= step;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(bias_only(0)))) break;
  }
  model.b = bias_only(0);
  return model;
}

/// lambda = omega * lambda_max.
inline SlrModel train_slr(const LabeledDataset& train, double omega, const AdmmOptions& options = {}) {
  if (!(omega > 0.0 && omega <= 1.0)) throw ContractError("train_slr: omega must lie in (0,1]");
  return train_slr_lambda(train, omega * slr_lambda_max(train), options);
}

}  // namespace fdia
