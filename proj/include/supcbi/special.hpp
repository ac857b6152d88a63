#pragma once

// Incomplete gamma functions.
//
// The regularized lower function P(a, x) is evaluated with the power series
//
//   P(a, x) = x^a e^{-x} / Gamma(a + 1) * sum_k x^k / ((a + 1) ... (a + k)),
//
// whose terms are all positive, so it is free of cancellation. The upper tail
// Q(a, x) for x > a + 1 uses the Legendre continued fraction (modified Lentz)
// so that small tail probabilities keep full relative precision.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "supcbi/error.hpp"

namespace supcbi::special {

namespace detail {

inline constexpr int kMaxSeriesTerms = 100000;
inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kTiny = 1e-300;

// Series for P(a, x); valid for every x >= 0, used for x below ~a + 100.
inline double gamma_p_series(double a, double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    term *= x / (a + k);
    sum += term;
    if (term < sum * kEps) {
      const double log_prefix = a * std::log(x) - x - std::lgamma(a + 1.0);
      return sum * std::exp(log_prefix);
    }
  }
  throw NumericalFailure("incomplete gamma series did not converge");
}

// Continued fraction for Q(a, x), x > a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) {
      const double log_prefix = a * std::log(x) - x - std::lgamma(a);
      return std::exp(log_prefix) * h;
    }
  }
  throw NumericalFailure("incomplete gamma continued fraction did not converge");
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a), a > 0.
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw InvalidArgument("gamma_p: shape must be positive");
  if (std::isnan(x) || x < 0.0) throw InvalidArgument("gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x <= a + 1.0 || x < 100.0) return std::min(1.0, detail::gamma_p_series(a, x));
  return 1.0 - detail::gamma_q_continued_fraction(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), a > 0.
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw InvalidArgument("gamma_q: shape must be positive");
  if (std::isnan(x) || x < 0.0) throw InvalidArgument("gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x > a + 1.0) return detail::gamma_q_continued_fraction(a, x);
  return 1.0 - detail::gamma_p_series(a, x);
}

/// Exponential integral E1(x) = int_x^inf e^{-t}/t dt, x > 0.
inline double expint_e1(double x) {
  if (!(x > 0.0)) throw InvalidArgument("expint_e1: x must be positive");
  if (x <= 1.0) {
    double sum = 0.0;
    double term = 1.0;
    for (int k = 1; k < detail::kMaxSeriesTerms; ++k) {
      term *= -x / k;
      const double contrib = -term / k;
      sum += contrib;
      if (std::abs(contrib) < std::abs(sum) * detail::kEps) break;
    }
    return -std::numbers::egamma - std::log(x) + sum;
  }
  double b = x + 1.0;
  double c = 1.0 / detail::kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < detail::kMaxSeriesTerms; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double delta = c * d;
    h *= delta;
    if (std::abs(delta - 1.0) < detail::kEps) return h * std::exp(-x);
  }
  throw NumericalFailure("expint_e1 continued fraction did not converge");
}

/// Non-regularized upper incomplete gamma Gamma(s, x) for s > -1, x > 0.
/// Negative shapes go through Gamma(s, x) = (Gamma(s + 1, x) - x^s e^{-x}) / s.
inline double upper_gamma(double s, double x) {
  if (!(s > -1.0)) throw InvalidArgument("upper_gamma: shape must exceed -1");
  if (!(x > 0.0)) {
    if (x == 0.0 && s > 0.0) return std::tgamma(s);
    throw InvalidArgument("upper_gamma: x must be positive");
  }
  if (s > 0.0) return std::tgamma(s) * gamma_q(s, x);
  if (s == 0.0) return expint_e1(x);
  const double upper_next = std::tgamma(s + 1.0) * gamma_q(s + 1.0, x);
  return (upper_next - std::exp(s * std::log(x) - x)) / s;
}

}  // namespace supcbi::special
