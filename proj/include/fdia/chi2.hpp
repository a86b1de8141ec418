#pragma once

// Chi-square distribution helpers built on the regularized lower incomplete
// gamma function P(a, x).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "fdia/errors.hpp"

namespace fdia {

namespace detail {

// Series expansion, converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), used for x >= a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma function P(a, x), a > 0, x >= 0.
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ContractError("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_continued_fraction(a, x);
}

inline double chi2_cdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * dof, 0.5 * x);
}

inline double chi2_pdf(double x, double dof) {
  if (x <= 0.0) return 0.0;
  const double k = 0.5 * dof;
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 - std::lgamma(k));
}

/// Standard normal quantile. Acklam's rational approximation polished by one
/// Halley step against erfc, giving close to full double precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("normal_quantile: p must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Quantile q with chi2_cdf(q, dof) == p. Starts from the Wilson-Hilferty
/// approximation, brackets the root, then runs safeguarded Newton steps.
inline double chi2_inverse_cdf(double p, int dof) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("chi2_inverse_cdf: p must lie in (0,1)");
  if (dof < 1) throw ContractError("chi2_inverse_cdf: dof must be positive");
  const double k = dof;
  const double z = normal_quantile(p);
  const double h = 2.0 / (9.0 * k);
  double guess = k * std::pow(std::max(1.0 - h + z * std::sqrt(h), 1e-3), 3.0);
  guess = std::max(guess, std::numeric_limits<double>::min());

  double lo = guess;
  double hi = guess;
  while (chi2_cdf(lo, k) > p && lo > std::numeric_limits<double>::min()) lo *= 0.5;
  while (chi2_cdf(hi, k) < p) hi *= 2.0;

  double x = std::clamp(guess, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = chi2_cdf(x, k) - p;
    if (f == 0.0) return x;
    if (f < 0.0) lo = x; else hi = x;
    const double slope = chi2_pdf(x, k);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * x || hi - lo <= 1e-15 * hi) return next;
    x = next;
  }
  return x;
}

}  // namespace fdia
