#pragma once

// Streaming detectors. Each step predicts with the current model and then
// updates it: online perceptron (OP), OP with weighted models (OPWM), a
// Pegasos-style online SVM and truncated-gradient online sparse logistic
// regression.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "fdia/dataset.hpp"
#include "fdia/errors.hpp"

namespace fdia {

enum class OnlineAlgorithm { op, opwm, online_svm, online_slr };

inline std::string_view online_algorithm_name(OnlineAlgorithm a) {
  switch (a) {
    case OnlineAlgorithm::op: return "op";
    case OnlineAlgorithm::opwm: return "opwm";
    case OnlineAlgorithm::online_svm: return "online-svm";
    case OnlineAlgorithm::online_slr: return "online-slr";
  }
  return "?";
}

inline OnlineAlgorithm online_algorithm_from_name(std::string_view name) {
  for (auto a : {OnlineAlgorithm::op, OnlineAlgorithm::opwm, OnlineAlgorithm::online_svm, OnlineAlgorithm::online_slr}) {
    if (online_algorithm_name(a) == name) return a;
  }
  throw ConfigError("unknown online algorithm '" + std::string(name) + "'");
}

struct OpState {
  Eigen::VectorXd w;
  double b = 0.0;
  std::size_t steps = 0;
  std::size_t mistakes = 0;
};

struct OpwmState {
  Eigen::VectorXd w;
  double b = 0.0;
  Eigen::VectorXd w_sum;
  double b_sum = 0.0;
  std::size_t steps = 0;
  std::size_t mistakes = 0;
  std::vector<Eigen::VectorXd> support_set;  // stored misclassified samples
  std::vector<Eigen::VectorXd> basis;        // orthonormal basis of span(support_set)

  Eigen::VectorXd averaged_w() const { return steps ? Eigen::VectorXd(w_sum / static_cast<double>(steps)) : w; }
  double averaged_b() const { return steps ? b_sum / static_cast<double>(steps) : b; }
};

struct OnlineSvmState {
  Eigen::VectorXd w;
  double b = 0.0;  // treated as the weight of a constant feature, so it is regularized too
  std::size_t steps = 0;
  std::size_t mistakes = 0;
  double lambda = 0.1;
};

struct OnlineSlrState {
  Eigen::VectorXd w;
  double b = 0.0;
  std::size_t steps = 0;
  std::size_t mistakes = 0;
  double eta = 0.1;       // learning rate
  double strength = 0.01;  // l1 strength g
  double total_penalty = 0.0;   // u: l1 penalty every weight could have received so far
  Eigen::VectorXd applied;      // q: penalty actually applied per weight
};

using OnlineState = std::variant<OpState, OpwmState, OnlineSvmState, OnlineSlrState>;

struct OnlineHyperparameters {
  double svm_lambda = 0.1;
  double slr_eta = 0.1;
  double slr_strength = 0.01;
  double independence_tolerance = 1e-8;
};

inline OnlineState make_online_state(OnlineAlgorithm algorithm, Eigen::Index dimension,
                                     const OnlineHyperparameters& hp = {}) {
  if (dimension < 1) throw ContractError("online state needs a positive dimension");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dimension);
  switch (algorithm) {
    case OnlineAlgorithm::op: return OpState{zero};
    case OnlineAlgorithm::opwm: {
      OpwmState s;
      s.w = zero;
      s.w_sum = zero;
      return s;
    }
    case OnlineAlgorithm::online_svm: {
      if (!(hp.svm_lambda > 0.0)) throw ContractError("online svm: lambda must be positive");
      OnlineSvmState s;
      s.w = zero;
      s.lambda = hp.svm_lambda;
      return s;
    }
    case OnlineAlgorithm::online_slr: {
      if (!(hp.slr_eta > 0.0) || hp.slr_strength < 0.0) throw ContractError("online slr: bad rate or strength");
      OnlineSlrState s;
      s.w = zero;
      s.applied = zero;
      s.eta = hp.slr_eta;
      s.strength = hp.slr_strength;
      return s;
    }
  }
  throw ContractError("unknown online algorithm");
}

inline Eigen::Index online_dimension(const OnlineState& state) {
  return std::visit([](const auto& s) { return s.w.size(); }, state);
}

/// Decision value of the model used for evaluation (OPWM: the averaged model).
inline double online_decision_value(const OnlineState& state, const Eigen::VectorXd& s) {
  require_dimension(online_dimension(state), s.size());
  if (const auto* o = std::get_if<OpwmState>(&state)) return o->averaged_w().dot(s) + o->averaged_b();
  return std::visit([&](const auto& st) { return st.w.dot(s) + st.b; }, state);
}

inline int online_predict(const OnlineState& state, const Eigen::VectorXd& s) {
  return decision_sign(online_decision_value(state, s));
}

namespace detail {

// Adds s to the orthonormal basis when its residual exceeds tol * ||s||.
inline bool extend_if_independent(std::vector<Eigen::VectorXd>& basis, const Eigen::VectorXd& s, double tol) {
  const double norm = s.norm();
  if (norm == 0.0) return false;
  Eigen::VectorXd r = s;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) r -= q.dot(r) * q;
  }
  const double rn = r.norm();
  if (rn <= tol * norm) return false;
  basis.push_back(r / rn);
  return true;
}

}  // namespace detail

/// One streaming step; returns the label predicted before the update.
inline int online_step(OnlineState& state, const Eigen::VectorXd& s, int y,
                       double independence_tolerance = 1e-8) {
  require_label(y);
  require_dimension(online_dimension(state), s.size());
  return std::visit(
      [&](auto& st) -> int {
        using T = std::decay_t<decltype(st)>;
        const int predicted = decision_sign(st.w.dot(s) + st.b);
        ++st.steps;
        if (predicted != y) ++st.mistakes;
        if constexpr (std::is_same_v<T, OpState>) {
          if (predicted != y) {
            st.w += y * s;
            st.b += y;
          }
        } else if constexpr (std::is_same_v<T, OpwmState>) {
          if (predicted != y && detail::extend_if_independent(st.basis, s, independence_tolerance)) {
            st.support_set.push_back(s);
            st.w += y * s;
            st.b += y;
          }
          st.w_sum += st.w;
          st.b_sum += st.b;
        } else if constexpr (std::is_same_v<T, OnlineSvmState>) {
          const double t = static_cast<double>(st.steps);
          const double eta = 1.0 / (st.lambda * t);
          const double margin = y * (st.w.dot(s) + st.b);
          st.w *= 1.0 - eta * st.lambda;
          st.b *= 1.0 - eta * st.lambda;
          if (margin < 1.0) {
            st.w += eta * y * s;
            st.b += eta * y;
          }
          const double norm = std::sqrt(st.w.squaredNorm() + st.b * st.b);
          const double radius = 1.0 / std::sqrt(st.lambda);
          if (norm > radius) {
            st.w *= radius / norm;
            st.b *= radius / norm;
          }
        } else {
          const double m = y * (st.w.dot(s) + st.b);
          const double tail = m > 0.0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
          const double g = st.eta * y * tail;
          st.w += g * s;
          st.b += g;
          // Cumulative-penalty truncation; the bias is not penalized.
          st.total_penalty += st.eta * st.strength;
          for (Eigen::Index j = 0; j < st.w.size(); ++j) {
            const double before = st.w(j);
            if (before > 0.0) {
              st.w(j) = std::max(0.0, before - (st.total_penalty + st.applied(j)));
            } else if (before < 0.0) {
              st.w(j) = std::min(0.0, before + (st.total_penalty - st.applied(j)));
            }
            st.applied(j) += st.w(j) - before;
          }
        }
        return predicted;
      },
      state);
}

struct LearningCurve {
  std::vector<std::size_t> steps;
  std::vector<double> accuracy;
  std::vector<double> recall_attacked;  // class-1 recall; NaN when the test set has no attacked sample
};

inline void write_learning_curve_csv(std::ostream& os, const LearningCurve& curve) {
  os << "step,accuracy\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.steps.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", curve.accuracy[i]);
    os << curve.steps[i] << ',' << buf << '\n';
  }
}

struct StreamResult {
  OnlineState state;
  LearningCurve curve;
  std::size_t mistakes = 0;
};

/// Feeds the stream in order and snapshots test accuracy every `eval_every`
/// steps, plus once at the end of the stream.
inline StreamResult run_stream(OnlineAlgorithm algorithm, const LabeledDataset& stream, const LabeledDataset& test,
                               std::size_t eval_every, const OnlineHyperparameters& hp = {}) {
  if (stream.empty()) throw ContractError("run_stream: empty stream");
  if (eval_every < 1) throw ContractError("run_stream: eval_every must be at least 1");
  const auto d = stream.dimension();
  if (!test.empty()) require_dimension(d, test.dimension());

  StreamResult result{make_online_state(algorithm, d, hp), {}, 0};
  auto snapshot = [&](std::size_t step) {
    std::size_t correct = 0;
    std::size_t attacked = 0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const int p = online_predict(result.state, test.samples[i]);
      correct += p == test.labels[i];
      if (test.labels[i] == kAttacked) {
        ++attacked;
        hit += p == kAttacked;
      }
    }
    result.curve.steps.push_back(step);
    result.curve.accuracy.push_back(test.empty() ? std::nan("") : static_cast<double>(correct) / static_cast<double>(test.size()));
    result.curve.recall_attacked.push_back(attacked ? static_cast<double>(hit) / static_cast<double>(attacked) : std::nan(""));
  };
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const int predicted = online_step(result.state, stream.samples[i], stream.labels[i], hp.independence_tolerance);
    result.mistakes += predicted != stream.labels[i];
    if ((i + 1) % eval_every == 0) snapshot(i + 1);
  }
  if (stream.size() % eval_every != 0) snapshot(stream.size());
  return result;
}

}  // namespace fdia
