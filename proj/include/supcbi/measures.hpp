#pragma once

// Mixing measure of reversion rates and the background driving Levy measure.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "supcbi/error.hpp"
#include "supcbi/random.hpp"
#include "supcbi/special.hpp"

namespace supcbi {

/// Gamma law pi(dr) ~ r^{alpha-1} e^{-r/beta} dr of reversion rates r (1/h).
///
/// alpha > 1 keeps int r^{-1} pi(dr) finite, which the stationary moments need.
class GammaMixingMeasure {
 public:
  GammaMixingMeasure(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    if (!std::isfinite(alpha) || !(alpha > 1.0))
      throw InvalidArgument("Gamma mixing measure: alpha must be > 1 (got " +
                            std::to_string(alpha) + ")");
    if (!std::isfinite(beta) || !(beta > 0.0))
      throw InvalidArgument("Gamma mixing measure: beta must be > 0 (got " +
                            std::to_string(beta) + ")");
  }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

  double cdf(double r) const {
    if (r <= 0.0) return 0.0;
    return special::gamma_p(alpha_, r / beta_);
  }

  double density(double r) const {
    if (r <= 0.0) return 0.0;
    const double x = r / beta_;
    return std::exp((alpha_ - 1.0) * std::log(x) - x - std::lgamma(alpha_)) / beta_;
  }

  /// R = int r^{-1} pi(dr) = 1 / (beta (alpha - 1)).
  double inv_mean() const noexcept { return 1.0 / (beta_ * (alpha_ - 1.0)); }

  /// theta with pi((0, theta]) = p, found by bisection on the CDF.
  ///
  /// p = 0 maps to 0 and p = 1 to +infinity. The bracket starts at
  /// [0, beta (alpha + 40 sqrt(alpha))] and doubles until it encloses p.
  double quantile(double p) const {
    if (std::isnan(p) || p < 0.0 || p > 1.0)
      throw InvalidArgument("quantile: probability must lie in [0, 1]");
    if (p == 0.0) return 0.0;
    if (p == 1.0) return std::numeric_limits<double>::infinity();

    // Above the median the comparison runs on the upper tail, which keeps
    // full relative precision in 1 - p.
    const bool upper = p > 0.5;
    const double tail = 1.0 - p;
    const auto below = [&](double r) {
      return upper ? special::gamma_q(alpha_, r / beta_) > tail : cdf(r) < p;
    };
    double lo = 0.0;
    double hi = beta_ * (alpha_ + 40.0 * std::sqrt(alpha_));
    int doublings = 0;
    while (below(hi)) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 64) throw NumericalFailure("quantile: bracketing failed");
    }
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (below(mid))
        lo = mid;
      else
        hi = mid;
      if (hi - lo <= kQuantileRelTol * hi) return 0.5 * (lo + hi);
    }
    throw NumericalFailure("quantile: bisection did not converge");
  }

  static constexpr double kQuantileRelTol = 1e-12;

 private:
  double alpha_;
  double beta_;
};

inline double inv_mean(const GammaMixingMeasure& pi) { return pi.inv_mean(); }

inline double pi_quantile(const GammaMixingMeasure& pi, double p) { return pi.quantile(p); }

/// Tempered stable Levy measure nu(dz) = e^{-c2 z} z^{-(1+c1)} dz on z > 0.
///
/// For 0 <= c1 < 1 the measure has infinite mass near zero but finite
/// variation; for c1 < 0 it is a finite (compound Poisson) measure.
class TemperedStableLevy {
 public:
  TemperedStableLevy(double c1, double c2) : c1_(c1), c2_(c2) {
    if (!std::isfinite(c1) || !(c1 < 1.0))
      throw InvalidArgument("tempered stable measure: c1 must be < 1 (got " +
                            std::to_string(c1) + ")");
    if (!std::isfinite(c2) || !(c2 > 0.0))
      throw InvalidArgument("tempered stable measure: c2 must be > 0 (got " +
                            std::to_string(c2) + ")");
  }

  double c1() const noexcept { return c1_; }
  double c2() const noexcept { return c2_; }

  /// M_k = int z^k nu(dz) = Gamma(k - c1) c2^{c1 - k}, k in {1, 2}.
  double moment(int k) const {
    check_order(k);
    return std::tgamma(k - c1_) * std::pow(c2_, c1_ - k);
  }

  /// int_{z >= eps} z^k nu(dz).
  double truncated_moment(int k, double eps) const {
    check_order(k);
    check_eps(eps);
    return moment(k) * special::gamma_q(k - c1_, c2_ * eps);
  }

  /// int_{0 < z < eps} z^k nu(dz); for k = 1 this is the bias of dropping small jumps.
  double small_jump_moment(int k, double eps) const {
    check_order(k);
    check_eps(eps);
    return moment(k) * special::gamma_p(k - c1_, c2_ * eps);
  }

  /// nu([eps, inf)), the arrival rate per unit intensity of jumps of size >= eps.
  double tail_mass(double eps) const {
    check_eps(eps);
    return std::pow(c2_, c1_) * special::upper_gamma(-c1_, c2_ * eps);
  }

 private:
  static void check_order(int k) {
    if (k != 1 && k != 2) throw InvalidArgument("Levy moment order must be 1 or 2");
  }
  static void check_eps(double eps) {
    if (!std::isfinite(eps) || !(eps > 0.0))
      throw InvalidArgument("jump floor eps must be positive");
  }

  double c1_;
  double c2_;
};

inline double levy_moment(const TemperedStableLevy& nu, int k) { return nu.moment(k); }

/// Draws jump sizes from nu restricted to [eps, inf), normalized.
///
/// For c1 >= 0 the range is split at b = max(eps, 1/c2): on [eps, b] a power
/// law proposal is thinned by e^{-c2 (z - eps)}, on [b, inf) a shifted
/// exponential proposal is thinned by (z / b)^{-(1 + c1)}. For c1 < 0 the
/// normalized measure is a Gamma(-c1, 1/c2) law conditioned on z >= eps.
class TruncatedJumpSampler {
 public:
  TruncatedJumpSampler(const TemperedStableLevy& nu, double eps)
      : c1_(nu.c1()), c2_(nu.c2()), eps_(eps), mass_(nu.tail_mass(eps)) {
    if (c1_ < 0.0) {
      const double keep = special::gamma_q(-c1_, c2_ * eps_);
      if (keep < 1e-3)
        throw InvalidArgument("jump floor eps discards almost all of a finite Levy measure");
      gamma_ = std::gamma_distribution<double>(-c1_, 1.0 / c2_);
      return;
    }
    split_ = std::max(eps_, 1.0 / c2_);
    const double upper = std::pow(c2_, c1_) * special::upper_gamma(-c1_, c2_ * split_);
    prob_lower_ = split_ > eps_ ? std::max(0.0, 1.0 - upper / mass_) : 0.0;
  }

  double eps() const noexcept { return eps_; }
  /// nu([eps, inf)).
  double mass() const noexcept { return mass_; }

  double operator()(Rng& rng) {
    if (c1_ < 0.0) {
      for (;;) {
        const double z = gamma_(rng);
        if (z >= eps_) return z;
      }
    }
    if (uniform_open(rng) < prob_lower_) return sample_lower(rng);
    return sample_upper(rng);
  }

 private:
  double sample_lower(Rng& rng) const {
    for (;;) {
      const double u = uniform_open(rng);
      double z;
      if (c1_ == 0.0) {
        z = eps_ * std::pow(split_ / eps_, u);
      } else {
        const double lo = std::pow(eps_, -c1_);
        const double hi = std::pow(split_, -c1_);
        z = std::pow(lo + u * (hi - lo), -1.0 / c1_);
      }
      if (uniform_open(rng) < std::exp(-c2_ * (z - eps_))) return z;
    }
  }

  double sample_upper(Rng& rng) const {
    for (;;) {
      const double z = split_ + exponential(rng, c2_);
      if (uniform_open(rng) < std::pow(z / split_, -(1.0 + c1_))) return z;
    }
  }

  double c1_;
  double c2_;
  double eps_;
  double mass_;
  double split_ = 0.0;
  double prob_lower_ = 0.0;
  std::gamma_distribution<double> gamma_;
};

}  // namespace supcbi
