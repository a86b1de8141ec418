#pragma once

#include <Eigen/Dense>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"

namespace fdia {

struct PerceptronModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double gamma = 0.1;
  int epochs = 100;       // budget
  int epochs_run = 0;
  bool converged = false;  // last epoch made no update

  double decision_value(const Eigen::VectorXd& s) const {
    require_dimension(w.size(), s.size());
    return w.dot(s) + b;
  }
  int predict(const Eigen::VectorXd& s) const { return decision_sign(decision_value(s)); }
};

/// Batch perceptron: w += gamma (y - f(s)) s over the training set in order,
/// with the bias as an implicit constant feature.
inline PerceptronModel train_perceptron(const LabeledDataset& train, double gamma = 0.1, int epochs = 100) {
  if (train.empty()) throw ContractError("train_perceptron: empty training set");
  if (!(gamma > 0.0)) throw ContractError("train_perceptron: gamma must be positive");
  if (epochs < 1) throw ContractError("train_perceptron: epochs must be positive");
  PerceptronModel model;
  model.w = Eigen::VectorXd::Zero(train.dimension());
  model.gamma = gamma;
  model.epochs = epochs;
  for (int e = 0; e < epochs; ++e) {
    bool updated = false;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const int y = train.labels[i];
      require_label(y);
      const double step = gamma * (y - model.predict(train.samples[i]));
      if (step != 0.0) {
        model.w += step * train.samples[i];
        model.b += step;
        updated = true;
      }
    }
    model.epochs_run = e + 1;
    if (!updated) {
      model.converged = true;
      break;
    }
  }
  return model;
}

}  // namespace fdia
