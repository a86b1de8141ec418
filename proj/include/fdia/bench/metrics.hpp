#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string_view>
#include <vector>

#include "fdia/attackgen.hpp"
#include "fdia/chi2.hpp"
#include "fdia/dataset.hpp"
#include "fdia/dc_grid.hpp"
#include "fdia/errors.hpp"

namespace fdia {

/// Positive = attacked.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

enum class Metric { acc, prec, rec, prec1, rec1, prec2, rec2 };
inline constexpr std::array<Metric, 7> kAllMetrics = {Metric::acc,   Metric::prec,  Metric::rec, Metric::prec1,
                                                      Metric::rec1, Metric::prec2, Metric::rec2};

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::acc: return "acc";
    case Metric::prec: return "prec";
    case Metric::rec: return "rec";
    case Metric::prec1: return "prec1";
    case Metric::rec1: return "rec1";
    case Metric::prec2: return "prec2";
    case Metric::rec2: return "rec2";
  }
  return "?";
}

/// Undefined entries (zero denominators) are empty optionals. Class-1 is the
/// attacked class, so prec1/rec1 coincide with the overall prec/rec.
struct MetricsReport {
  std::optional<double> acc, prec, rec, prec1, rec1, prec2, rec2;

  std::optional<double> get(Metric m) const {
    switch (m) {
      case Metric::acc: return acc;
      case Metric::prec: return prec;
      case Metric::rec: return rec;
      case Metric::prec1: return prec1;
      case Metric::rec1: return rec1;
      case Metric::prec2: return prec2;
      case Metric::rec2: return rec2;
    }
    return std::nullopt;
  }
};

namespace detail {
inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline MetricsReport metrics_from(const Confusion& c) {
  MetricsReport r;
  r.acc = detail::ratio(c.tp + c.tn, c.total());
  r.prec = detail::ratio(c.tp, c.tp + c.fp);
  r.rec = detail::ratio(c.tp, c.tp + c.fn);
  r.prec1 = r.prec;
  r.rec1 = r.rec;
  r.prec2 = detail::ratio(c.tn, c.tn + c.fn);
  r.rec2 = detail::ratio(c.tn, c.fp + c.tn);
  return r;
}

inline Confusion confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw ContractError("score: predictions and labels differ in length");
  if (predictions.empty()) throw ContractError("score: nothing to score");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require_label(predictions[i]);
    require_label(labels[i]);
    if (predictions[i] == kAttacked) {
      (labels[i] == kAttacked ? c.tp : c.fp) += 1;
    } else {
      (labels[i] == kAttacked ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

struct Score {
  Confusion confusion;
  MetricsReport report;
};

inline Score score(const std::vector<int>& predictions, const std::vector<int>& labels) {
  const auto c = confusion(predictions, labels);
  return {c, metrics_from(c)};
}

/// Per-measurement lift of the residual detector: measurement i is flagged
/// when its standardized residual |z_tilde_i - (H x_hat)_i| / sd_i exceeds the
/// two-sided normal quantile. sd_i is the residual's own noise-only standard
/// deviation, so each flag fires with probability 1 - confidence on clean
/// data. Critical measurements (sd_i = 0) are never flagged.
inline std::vector<int> sve_as_classifier(const DcModel& model, const Trial& trial, double confidence = 0.95) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ContractError("sve_as_classifier: confidence must lie in (0,1)");
  if (trial.z_tilde.size() != model.num_measurements()) throw ContractError("sve_as_classifier: trial does not match model");
  const double cut = normal_quantile(0.5 * (1.0 + confidence));
  const VectorXd x_hat = wls_estimate(model, trial.z_tilde);
  const VectorXd r = (trial.z_tilde - model.H * x_hat).cwiseAbs();
  std::vector<int> out(static_cast<std::size_t>(r.size()), kSecure);
  for (Index i = 0; i < r.size(); ++i) {
    const double sd = model.residual_std(i);
    if (sd > 1e-12 * model.noise_std(i) && r(i) > cut * sd) out[static_cast<std::size_t>(i)] = kAttacked;
  }
  return out;
}

}  // namespace fdia
