#pragma once

// Static feedback control of the lifted discharge: closed-form long-run
// objective J, control cost K and flow-modification measure P as functions of
// q = rho / (rho - u) and h = rho - u, and the constrained optimizer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "supcbi/csv.hpp"
#include "supcbi/error.hpp"
#include "supcbi/lift.hpp"
#include "supcbi/model.hpp"

namespace supcbi {

/// Precomputed lift sums shared by the J, K and P evaluators.
class ControlEvaluator {
 public:
  ControlEvaluator(const SupCbiModel& model, const MarkovianLift& lift)
      : d_(model.D()),
        inv_mean_(lift.inv_mean()),
        mean_(stationary_mean(model, lift)),
        variance_(stationary_variance(model, lift)),
        half_am2_d2_(0.5 * model.A() * model.M2() / (model.D() * model.D())) {
    w_.reserve(lift.size());
    s_.reserve(lift.size());
    for (std::size_t i = 0; i < lift.size(); ++i) {
      w_.push_back(lift.weight(i) / lift.rate(i));
      s_.push_back(lift.rate(i) * d_);
    }
  }

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }
  double inv_mean() const noexcept { return inv_mean_; }
  double D() const noexcept { return d_; }

  /// J(h) = Var R_n^{-1} sum w_i (r_i D + q^2 h) / (r_i D + h).
  double J(double q, double h) const {
    check(q, h);
    if (std::isinf(h)) return q * q * variance_;
    double sum = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) sum += w_[i] * (s_[i] + q * q * h) / (s_[i] + h);
    return variance_ * sum / inv_mean_;
  }

  /// K(h) = h^2 (1 - q)^2 Var R_n^{-1} sum w_i r_i D / (r_i D + h).
  double K(double q, double h) const {
    check(q, h);
    const double g = (1.0 - q) * (1.0 - q);
    if (g == 0.0) return 0.0;
    if (std::isinf(h)) return std::numeric_limits<double>::infinity();
    return h * h * g * variance_ * cost_shape(h);
  }

  /// P(h) = (q - 1)^2 (E^2 + (A M2 / (2 D^2)) sum w_i h / (r_i D + h)).
  double P(double q, double h) const {
    check(q, h);
    const double g = (q - 1.0) * (q - 1.0);
    if (std::isinf(h)) return g * (mean_ * mean_ + variance_);
    double sum = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) sum += w_[i] * h / (s_[i] + h);
    return g * (mean_ * mean_ + half_am2_d2_ * sum);
  }

  double P_lower(double q) const { return (q - 1.0) * (q - 1.0) * mean_ * mean_; }
  double P_upper(double q) const { return (q - 1.0) * (q - 1.0) * (mean_ * mean_ + variance_); }

  /// R_n^{-1} sum w_i r_i D / (r_i D + h); decreases from 1 at h = 0.
  double cost_shape(double h) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) sum += w_[i] * s_[i] / (s_[i] + h);
    return sum / inv_mean_;
  }

 private:
  static void check(double q, double h) {
    if (!std::isfinite(q) || !(q > 0.0)) throw InvalidArgument("q must be finite and > 0");
    if (std::isnan(h) || h < 0.0) throw InvalidArgument("h = rho - u must be >= 0");
  }

  double d_;
  double inv_mean_;
  double mean_;
  double variance_;
  double half_am2_d2_;
  std::vector<double> w_;  // c_i / r_i
  std::vector<double> s_;  // r_i D
};

inline double eval_J(const SupCbiModel& model, const MarkovianLift& lift, double q, double h) {
  return ControlEvaluator(model, lift).J(q, h);
}
inline double eval_K(const SupCbiModel& model, const MarkovianLift& lift, double q, double h) {
  return ControlEvaluator(model, lift).K(q, h);
}
inline double eval_P(const SupCbiModel& model, const MarkovianLift& lift, double q, double h) {
  return ControlEvaluator(model, lift).P(q, h);
}

/// Target of the mean-discharge constraint.
struct Target {
  enum class Kind { discharge, abstraction };
  Kind kind;
  double value;  // m^3/s

  static Target discharge(double qhat) { return {Kind::discharge, qhat}; }
  static Target abstraction(double qabs) { return {Kind::abstraction, qabs}; }
};

/// q from the target: Qhat / (baseflow + E) or 1 - Qabs / (baseflow + E).
inline double q_from_target(const SupCbiModel& model, const MarkovianLift& lift, Target target) {
  if (!std::isfinite(target.value)) throw InvalidArgument("target must be finite");
  const double inflow = model.baseflow() + stationary_mean(model, lift);
  if (!(inflow > 0.0)) throw Infeasible("mean inflow is zero");
  double q = 0.0;
  if (target.kind == Target::Kind::discharge) {
    q = target.value / inflow;
  } else {
    if (target.value < 0.0) throw InvalidArgument("Qabs must be >= 0");
    q = 1.0 - target.value / inflow;
  }
  if (!(q > 0.0))
    throw Infeasible("target gives q = " + csv::short_num(q) +
                     " <= 0 (abstraction must stay below the mean inflow " +
                     csv::short_num(inflow) + ")");
  return q;
}

inline constexpr double kPicardRelTol = 1e-12;
inline constexpr int kPicardMaxIterations = 200;

namespace detail {

inline void check_hbar_args(double q, double kbar) {
  if (!std::isfinite(q) || !(q > 0.0)) throw InvalidArgument("q must be finite and > 0");
  if (q == 1.0) throw InvalidArgument("h-bar is undefined for q = 1 (K vanishes identically)");
  if (!std::isfinite(kbar) || !(kbar > 0.0)) throw InvalidArgument("Kbar must be finite and > 0");
}

// Smallest h with f(h) >= target for increasing f with f(0) < target, by
// doubling from `start` and bisecting to relative width 1e-15.
template <typename F>
double increasing_root(F&& f, double target, double start) {
  double lo = 0.0;
  double hi = start > 0.0 ? start : 1.0;
  for (int k = 0; f(hi) < target; ++k) {
    if (k > 2000 || !std::isfinite(hi)) throw NumericalFailure("root bracketing failed");
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// h-bar with K(h-bar) = Kbar by bisection on the increasing map h -> K(h).
inline double solve_hbar_bisection(const ControlEvaluator& ev, double q, double kbar) {
  detail::check_hbar_args(q, kbar);
  const double g = (1.0 - q) * (1.0 - q) * ev.variance();
  return detail::increasing_root([&](double h) { return ev.K(q, h); }, kbar,
                                 std::sqrt(kbar / g));
}

/// h-bar with K(h-bar) = Kbar by Picard iteration h <- sqrt(Kbar / (K(h) / h^2)).
///
/// The iteration map is increasing and its slope at the fixed point is below
/// 1/2, so the iterates rise monotonically from sqrt(Kbar / ((1-q)^2 Var)).
/// Bisection takes over if the iteration has not settled after 200 steps.
inline double solve_hbar(const ControlEvaluator& ev, double q, double kbar) {
  detail::check_hbar_args(q, kbar);
  const double g = (1.0 - q) * (1.0 - q) * ev.variance();
  double h = std::sqrt(kbar / g);
  for (int it = 0; it < kPicardMaxIterations; ++it) {
    const double next = std::sqrt(kbar / (g * ev.cost_shape(h)));
    if (!std::isfinite(next)) break;
    const bool done = std::abs(next - h) <= kPicardRelTol * next;
    h = next;
    if (done) return h;
  }
  return solve_hbar_bisection(ev, q, kbar);
}

inline double solve_hbar(const SupCbiModel& model, const MarkovianLift& lift, double q,
                         double kbar) {
  return solve_hbar(ControlEvaluator(model, lift), q, kbar);
}

/// h with P(h) = Pbar; +infinity when Pbar is at or above the upper bound.
inline double solve_h_variability(const ControlEvaluator& ev, double q, double pbar) {
  const double lower = ev.P_lower(q);
  if (pbar < lower)
    throw Infeasible("Pbar = " + csv::short_num(pbar) + " is below the lower bound " +
                     csv::short_num(lower) + " of P");
  if (pbar >= ev.P_upper(q)) return std::numeric_limits<double>::infinity();
  if (pbar == lower) return 0.0;
  return detail::increasing_root([&](double h) { return ev.P(q, h); }, pbar, 1.0);
}

struct ControlProblem {
  SupCbiModel model;
  MarkovianLift lift;
  Target target;
  double kbar;
  std::optional<double> pbar;
};

enum class ControlCase { balanced, water_adding, water_abstracting };

inline std::string to_string(ControlCase c) {
  switch (c) {
    case ControlCase::balanced: return "Balanced";
    case ControlCase::water_adding: return "WaterAdding";
    case ControlCase::water_abstracting: return "WaterAbstracting";
  }
  return "?";
}

/// Which constraint fixes h-bar: the cost bound (K), the variability bound (P), or neither.
enum class ActiveConstraint { none, cost, variability };

inline std::string to_string(ActiveConstraint a) {
  switch (a) {
    case ActiveConstraint::none: return "none";
    case ActiveConstraint::cost: return "K";
    case ActiveConstraint::variability: return "P";
  }
  return "?";
}

struct ControlSolution {
  ControlCase case_label = ControlCase::balanced;
  double q = 1.0;
  double hbar = 0.0;
  double rho = 0.0;
  double u = 0.0;
  double J = 0.0;
  double K = 0.0;
  std::optional<double> P;
  ActiveConstraint active = ActiveConstraint::none;
  bool attained = true;       // false when only an infimum exists
  bool rho_arbitrary = false; // any rho > 0 is optimal
  bool p_vacuous = false;     // Pbar at or above the upper bound of P
  double x_hat = 0.0;         // target of the shifted process, q E[Y_n]
};

inline constexpr double kBalancedTol = 1e-12;

/// Optimal static controller for the mean target, cost bound and optional variability bound.
inline ControlSolution solve(const ControlProblem& problem, const ControlEvaluator& ev) {
  if (!std::isfinite(problem.kbar) || !(problem.kbar > 0.0))
    throw InvalidArgument("Kbar must be finite and > 0");
  if (problem.pbar && !(std::isfinite(*problem.pbar) && *problem.pbar > 0.0))
    throw InvalidArgument("Pbar must be finite and > 0");

  ControlSolution sol;
  const double q = q_from_target(problem.model, problem.lift, problem.target);
  sol.q = q;
  sol.x_hat = q * ev.mean();

  if (std::abs(q - 1.0) <= kBalancedTol) {
    sol.case_label = ControlCase::balanced;
    sol.rho = 1.0;
    sol.hbar = 1.0;
    sol.u = 0.0;
    sol.rho_arbitrary = true;
    sol.J = ev.variance();
    sol.K = 0.0;
    if (problem.pbar) sol.P = 0.0;
    return sol;
  }

  double h_var = std::numeric_limits<double>::infinity();
  if (problem.pbar) {
    h_var = solve_h_variability(ev, q, *problem.pbar);
    sol.p_vacuous = std::isinf(h_var);
  }

  if (q > 1.0) {
    sol.case_label = ControlCase::water_adding;
    sol.attained = false;
    sol.hbar = 0.0;
    sol.J = ev.variance();
    sol.K = 0.0;
    if (problem.pbar) sol.P = ev.P(q, 0.0);
    return sol;
  }

  sol.case_label = ControlCase::water_abstracting;
  const double h_cost = solve_hbar(ev, q, problem.kbar);
  if (h_var < h_cost) {
    sol.hbar = h_var;
    sol.active = ActiveConstraint::variability;
  } else {
    sol.hbar = h_cost;
    sol.active = ActiveConstraint::cost;
  }
  if (!(sol.hbar > 0.0))
    throw Infeasible("Pbar equals the lower bound of P; only h = 0 is admissible");
  sol.rho = q * sol.hbar;
  sol.u = -(1.0 - q) * sol.hbar;
  sol.J = ev.J(q, sol.hbar);
  sol.K = ev.K(q, sol.hbar);
  if (problem.pbar) sol.P = ev.P(q, sol.hbar);
  return sol;
}

inline ControlSolution solve(const ControlProblem& problem) {
  return solve(problem, ControlEvaluator(problem.model, problem.lift));
}

struct SweepRow {
  double kbar = 0.0;
  std::optional<ControlSolution> solution;
  std::string error;  // set when the row failed
};

/// One solve per Kbar value; a failing row records its message and the sweep continues.
inline std::vector<SweepRow> sweep(const ControlProblem& problem, std::span<const double> kbars) {
  const ControlEvaluator ev(problem.model, problem.lift);
  std::vector<SweepRow> rows;
  rows.reserve(kbars.size());
  for (const double kbar : kbars) {
    SweepRow row;
    row.kbar = kbar;
    ControlProblem p = problem;
    p.kbar = kbar;
    try {
      row.solution = solve(p, ev);
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// CSV `Kbar,hbar,rho,u,J,K,P,active_constraint`. P and active_constraint are
/// empty without a variability bound; failed rows carry `error` as the constraint.
inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows, bool with_pbar) {
  os << "Kbar,hbar,rho,u,J,K,P,active_constraint\n";
  for (const auto& row : rows) {
    os << csv::num(row.kbar) << ',';
    if (!row.solution) {
      os << ",,,,,,error\n";
      continue;
    }
    const auto& s = *row.solution;
    os << csv::num(s.hbar) << ',' << csv::num(s.rho) << ',' << csv::num(s.u) << ','
       << csv::num(s.J) << ',' << csv::num(s.K) << ',';
    if (with_pbar && s.P) os << csv::num(*s.P);
    os << ',';
    if (with_pbar) os << to_string(s.active);
    os << '\n';
  }
}

/// J, K and P in their mixing-measure integral form, with the level-m quantile
/// lift as the quadrature rule for pi.
struct ContinuumValues {
  double J;
  double K;
  double P;
};

inline ContinuumValues continuum_J_K_P(const SupCbiModel& model, double q, double h, int m) {
  if (!std::isfinite(q) || !(q > 0.0)) throw InvalidArgument("q must be finite and > 0");
  if (!std::isfinite(h) || h < 0.0) throw InvalidArgument("h must be finite and >= 0");
  const MarkovianLift rule = build_lift(model.pi(), m);
  const double d = model.D();
  const double inv_mean = rule.integrate([](double r) { return 1.0 / r; });
  const double half_am2_d2 = 0.5 * model.A() * model.M2() / (d * d);
  const double var = half_am2_d2 * inv_mean;
  const double mean = model.A() * model.M1() / d * inv_mean;
  const double j_int =
      rule.integrate([&](double r) { return (r * d + q * q * h) / (r * (r * d + h)); });
  const double k_int = rule.integrate([&](double r) { return d / (r * d + h); });
  const double p_int = rule.integrate([&](double r) { return h / (r * (r * d + h)); });
  const double g = (1.0 - q) * (1.0 - q);
  return {var * j_int / inv_mean, h * h * g * var * k_int / inv_mean,
          g * (mean * mean + half_am2_d2 * p_int)};
}

/// h-bar of the integral-form cost equation, with the level-m quantile lift as quadrature.
inline double continuum_hbar(const SupCbiModel& model, double q, double kbar, int m) {
  return solve_hbar(model, build_lift(model.pi(), m), q, kbar);
}

}  // namespace supcbi
