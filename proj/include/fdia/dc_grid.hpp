#pragma once

// DC measurement model, weighted least-squares state estimation and the
// residual (chi-square) attack detector.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <vector>

#include "fdia/chi2.hpp"
#include "fdia/errors.hpp"
#include "fdia/matpower_io.hpp"

namespace fdia {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct MeasurementKind {
  enum class Type { branch_flow, bus_injection };
  Type type = Type::branch_flow;
  std::size_t index = 0;  // branch index into CaseSystem::branches, or bus position

  friend bool operator==(const MeasurementKind&, const MeasurementKind&) = default;
};

/// Immutable after construction. Rows of H are measurements (branch flows
/// first, in branch order, then bus injections in bus order); columns are bus
/// angles in bus order. The reference angle is kept, so H has a one-dimensional
/// null space spanned by the all-ones vector on a connected network.
struct DcModel {
  std::string name;
  MatrixXd H;
  VectorXd x0;         // radians
  VectorXd noise_std;  // per-measurement standard deviation
  Index rank = 0;
  std::vector<MeasurementKind> measurement_kinds;
  // Minimum-norm weighted least-squares operator: x_hat = estimator * z.
  MatrixXd estimator;
  // Standard deviation of each residual entry z_i - (H x_hat)_i under noise
  // alone; zero for critical measurements.
  VectorXd residual_std;

  Index num_measurements() const { return H.rows(); }
  Index num_states() const { return H.cols(); }
  /// Smallest attack support for which column-space attacks are counted as unobservable.
  Index kappa_star() const { return num_measurements() - num_states() + 1; }
  Index residual_dof() const { return num_measurements() - rank; }
  VectorXd clean_measurements() const { return H * x0; }
};

struct EstimationResult {
  VectorXd x_hat;
  double residual_rho = 0.0;
  double threshold_tau = 0.0;
  bool attacked_flag = false;
};

namespace detail {

inline bool is_connected(const CaseSystem& cs, const std::map<int, Index>& position) {
  const auto n = cs.buses.size();
  if (n == 0) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::size_t components = n;
  for (const auto& br : cs.branches) {
    if (br.status != BranchStatus::in_service) continue;
    const auto a = find(static_cast<std::size_t>(position.at(br.from_bus)));
    const auto b = find(static_cast<std::size_t>(position.at(br.to_bus)));
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

inline double sample_std(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline constexpr double kNoiseFloor = 1e-6;

inline DcModel build_dc_model(const CaseSystem& cs, double noise_scale = 0.01) {
  if (!(noise_scale > 0.0)) throw ContractError("build_dc_model: noise_scale must be positive");
  validate_case(cs);

  std::map<int, Index> position;
  for (std::size_t i = 0; i < cs.buses.size(); ++i) position[cs.buses[i].id] = static_cast<Index>(i);
  if (!detail::is_connected(cs, position)) throw ModelError("network '" + cs.name + "' is not connected");

  const Index num_buses = static_cast<Index>(cs.buses.size());
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < cs.branches.size(); ++k) {
    if (cs.branches[k].status == BranchStatus::in_service) active.push_back(k);
  }
  const Index num_flows = static_cast<Index>(active.size());

  DcModel model;
  model.name = cs.name;
  model.H = MatrixXd::Zero(num_flows + num_buses, num_buses);
  for (Index row = 0; row < num_flows; ++row) {
    const auto& br = cs.branches[active[static_cast<std::size_t>(row)]];
    const double susceptance = 1.0 / br.reactance;
    const Index i = position.at(br.from_bus);
    const Index j = position.at(br.to_bus);
    model.H(row, i) += susceptance;
    model.H(row, j) -= susceptance;
    // Injections: flow leaves the from-bus and enters the to-bus.
    model.H.row(num_flows + i) += model.H.row(row);
    model.H.row(num_flows + j) -= model.H.row(row);
    model.measurement_kinds.push_back({MeasurementKind::Type::branch_flow, active[static_cast<std::size_t>(row)]});
  }
  for (Index b = 0; b < num_buses; ++b) {
    model.measurement_kinds.push_back({MeasurementKind::Type::bus_injection, static_cast<std::size_t>(b)});
  }

  model.x0.resize(num_buses);
  for (Index b = 0; b < num_buses; ++b) {
    model.x0(b) = cs.buses[static_cast<std::size_t>(b)].voltage_angle * std::numbers::pi / 180.0;
  }

  const VectorXd clean = model.H * model.x0;
  if (clean.cwiseAbs().maxCoeff() == 0.0) {
    throw ModelError("network '" + cs.name + "' has an all-zero clean measurement vector");
  }
  const double sigma_ref = detail::sample_std(clean);
  model.noise_std = VectorXd::Constant(model.H.rows(), noise_scale * std::max(sigma_ref, kNoiseFloor));

  Eigen::JacobiSVD<MatrixXd> svd(model.H);
  svd.setThreshold(1e-10);
  model.rank = svd.rank();

  const VectorXd inv_std = model.noise_std.cwiseInverse();
  const MatrixXd weighted = inv_std.asDiagonal() * model.H;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(weighted);
  cod.setThreshold(1e-10);
  model.estimator = cod.pseudoInverse() * inv_std.asDiagonal();

  const MatrixXd S = MatrixXd::Identity(model.H.rows(), model.H.rows()) - model.H * model.estimator;
  model.residual_std = (S.array().square().matrix() * model.noise_std.array().square().matrix()).cwiseSqrt();
  return model;
}

/// Minimum-norm solution of the weighted normal equations.
inline VectorXd wls_estimate(const DcModel& model, const VectorXd& z) {
  if (z.size() != model.num_measurements()) {
    throw ContractError("wls_estimate: expected " + std::to_string(model.num_measurements()) +
                        " measurements, got " + std::to_string(z.size()));
  }
  return model.estimator * z;
}

/// Noise-normalized residual sum of squares for a given estimate.
inline double normalized_residual(const DcModel& model, const VectorXd& z, const VectorXd& x_hat) {
  return ((z - model.H * x_hat).array() / model.noise_std.array()).square().sum();
}

inline double detection_threshold(const DcModel& model, double confidence = 0.95) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ContractError("confidence must lie in (0,1)");
  return chi2_inverse_cdf(confidence, static_cast<int>(model.residual_dof()));
}

inline EstimationResult residual_detect(const DcModel& model, const VectorXd& z_tilde, double confidence = 0.95) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ContractError("residual_detect: confidence must lie in (0,1)");
  EstimationResult result;
  result.x_hat = wls_estimate(model, z_tilde);
  result.residual_rho = normalized_residual(model, z_tilde, result.x_hat);
  result.threshold_tau = detection_threshold(model, confidence);
  result.attacked_flag = result.residual_rho > result.threshold_tau;
  return result;
}

}  // namespace fdia
