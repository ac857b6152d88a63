#pragma once

// Lifted supCBI discharge model: parameters, stationary moments and ACF.

#include <cmath>
#include <string>

#include "supcbi/error.hpp"
#include "supcbi/lift.hpp"
#include "supcbi/measures.hpp"

namespace supcbi {

/// Immigration scale A, self-excitation scale B, mixing measure pi, Levy
/// measure nu and additive baseflow. D = 1 - B M1 must lie in (0, 1].
///
/// A model may carry the moments of nu restricted to jumps >= eps instead of
/// the full moments; simulations drop smaller jumps, and closed forms built
/// from the truncated model are the ones they converge to.
class SupCbiModel {
 public:
  SupCbiModel(double A, double B, GammaMixingMeasure pi, TemperedStableLevy nu,
              double baseflow)
      : SupCbiModel(A, B, pi, nu, baseflow, nu.moment(1), nu.moment(2), 0.0) {}

  /// Same model with the moments of nu replaced by those of nu on [eps, inf).
  SupCbiModel truncated(double eps) const {
    return SupCbiModel(a_, b_, pi_, nu_, baseflow_, nu_.truncated_moment(1, eps),
                       nu_.truncated_moment(2, eps), eps);
  }

  double A() const noexcept { return a_; }
  double B() const noexcept { return b_; }
  const GammaMixingMeasure& pi() const noexcept { return pi_; }
  const TemperedStableLevy& nu() const noexcept { return nu_; }
  double baseflow() const noexcept { return baseflow_; }
  double M1() const noexcept { return m1_; }
  double M2() const noexcept { return m2_; }
  double D() const noexcept { return 1.0 - b_ * m1_; }
  /// Jump floor the moments refer to; 0 for the untruncated measure.
  double jump_floor() const noexcept { return eps_; }

 private:
  SupCbiModel(double A, double B, GammaMixingMeasure pi, TemperedStableLevy nu,
              double baseflow, double m1, double m2, double eps)
      : a_(A), b_(B), pi_(pi), nu_(nu), baseflow_(baseflow), m1_(m1), m2_(m2), eps_(eps) {
    if (!std::isfinite(A) || !(A > 0.0)) throw InvalidArgument("model: A must be > 0");
    if (!std::isfinite(B) || B < 0.0) throw InvalidArgument("model: B must be >= 0");
    if (!std::isfinite(baseflow) || baseflow < 0.0)
      throw InvalidArgument("model: baseflow must be >= 0");
    if (!std::isfinite(m1) || !(m1 > 0.0) || !std::isfinite(m2) || !(m2 > 0.0))
      throw NumericalFailure("model: Levy moments must be finite and positive");
    if (!(B * m1 < 1.0))
      throw InvalidArgument("model: stationarity requires B*M1 < 1 (B*M1 = " +
                            std::to_string(B * m1) + ")");
  }

  double a_;
  double b_;
  GammaMixingMeasure pi_;
  TemperedStableLevy nu_;
  double baseflow_;
  double m1_;
  double m2_;
  double eps_;
};

/// E[Y_n] = (A M1 / D) R_n, baseflow excluded.
inline double stationary_mean(const SupCbiModel& model, const MarkovianLift& lift) {
  return model.A() * model.M1() / model.D() * lift.inv_mean();
}

/// Var[Y_n] = (A M2 / (2 D^2)) R_n.
inline double stationary_variance(const SupCbiModel& model, const MarkovianLift& lift) {
  const double d = model.D();
  return 0.5 * model.A() * model.M2() / (d * d) * lift.inv_mean();
}

inline void check_lag(double tau) {
  if (std::isnan(tau) || tau < 0.0) throw InvalidArgument("ACF lag must be >= 0");
}

/// ACF of the continuum process under the Gamma mixing measure.
inline double acf_gamma(const SupCbiModel& model, double tau) {
  check_lag(tau);
  const auto& pi = model.pi();
  return std::pow(1.0 + model.D() * pi.beta() * tau, -(pi.alpha() - 1.0));
}

/// ACF of the lifted process: R_n^{-1} sum_i (c_i / r_i) e^{-D tau r_i}.
inline double acf_lift(const SupCbiModel& model, const MarkovianLift& lift, double tau) {
  check_lag(tau);
  const double d = model.D();
  const double num = lift.integrate([&](double r) { return std::exp(-d * tau * r) / r; });
  return num / lift.inv_mean();
}

}  // namespace supcbi
