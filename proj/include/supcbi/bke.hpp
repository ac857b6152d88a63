#pragma once

// Quadratic potentials solving the stationary backward Kolmogorov equations
// of the variance objective and of the control cost, and the residual of
// those equations at arbitrary states. The residual is evaluated term by term
// from the generic generator of the lifted system, so it does not share any
// algebra with the closed-form coefficients it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "supcbi/error.hpp"
#include "supcbi/lift.hpp"
#include "supcbi/model.hpp"
#include "supcbi/random.hpp"

namespace supcbi {

/// Phi(y) = 1/2 sum a_jk y_j y_k + sum b_k y_k on y = (x, y_1, ..., y_n),
/// together with the ergodic constant the equation pairs it with.
struct QuadraticPotential {
  std::size_t dim = 0;    // n + 1
  std::vector<double> a;  // dim x dim, row-major, symmetric
  std::vector<double> b;  // dim
  double constant = 0.0;  // J for the variance equation, L for the cost equation

  double& at(std::size_t j, std::size_t k) { return a[j * dim + k]; }
  double at(std::size_t j, std::size_t k) const { return a[j * dim + k]; }
};

/// Running cost of the equation: (x - x_hat)^2 or (x - q sum y)^2.
enum class RunningCost { variance, control_cost };

struct ControlPoint {
  double q;      // rho / (rho - u)
  double h;      // rho - u > 0
  double x_hat;  // target of the shifted process (variance equation only)

  double rho() const { return q * h; }
};

namespace detail {

inline void check_point(const ControlPoint& cp) {
  if (!std::isfinite(cp.q) || !(cp.q > 0.0)) throw InvalidArgument("bke: q must be > 0");
  if (!std::isfinite(cp.h) || !(cp.h > 0.0)) throw InvalidArgument("bke: h must be > 0");
}

}  // namespace detail

/// Potential and J for the variance objective with general target x_hat.
inline QuadraticPotential variance_potential(const SupCbiModel& model, const MarkovianLift& lift,
                                             const ControlPoint& cp) {
  detail::check_point(cp);
  const std::size_t n = lift.size();
  const double d = model.D();
  const double h = cp.h;
  const double q = cp.q;
  const double am1 = model.A() * model.M1();
  const double am2 = model.A() * model.M2();
  const double bm2 = model.B() * model.M2();

  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = lift.rate(i) / h;

  QuadraticPotential phi;
  phi.dim = n + 1;
  phi.a.assign(phi.dim * phi.dim, 0.0);
  phi.b.assign(phi.dim, 0.0);

  phi.at(0, 0) = 1.0 / h;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = (q - p[i] * d) / (h * (p[i] * d + 1.0));
    phi.at(0, i + 1) = v;
    phi.at(i + 1, 0) = v;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      phi.at(i + 1, j + 1) = (q - p[i] * d) * (q - p[j] * d) / (h * (p[i] + p[j]) * d) *
                             (1.0 / (p[j] * d + 1.0) + 1.0 / (p[i] * d + 1.0));

  // sum_k (c_k / r_k) p_k / (p_k D + 1) and sum_k (c_k / r_k) p_k.
  double s_ratio = 0.0;
  double s_p = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = lift.weight(k) / lift.rate(k);
    s_ratio += w * p[k] / (p[k] * d + 1.0);
    s_p += w * p[k];
  }
  const double b0 = -2.0 * cp.x_hat / h + (q + 1.0) * am1 * s_ratio / h;
  phi.b[0] = b0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pid = p[i] * d;
    double cross = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = lift.weight(k) / lift.rate(k);
      cross += w * p[k] * (q - pid) * (q - p[k] * d) / ((p[i] + p[k]) * d) *
               (1.0 / (pid + 1.0) + 1.0 / (p[k] * d + 1.0));
    }
    const double rhs = -2.0 * q * cp.x_hat + q * (q + 1.0) * am1 * s_ratio +
                       0.5 * bm2 * (pid + q * q) / (d * (pid + 1.0)) +
                       am1 * (q - pid) / (pid + 1.0) * s_p + am1 * cross;
    phi.b[i + 1] = rhs / (lift.rate(i) * d) - b0;
  }

  const double mean = am1 / d * lift.inv_mean();
  double tail = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = lift.weight(i) / lift.rate(i);
    tail += w * (p[i] * d + q * q) / (p[i] * d + 1.0);
  }
  const double dev = cp.x_hat - q * mean;
  phi.constant = dev * dev + 0.5 * am2 / (d * d) * tail;
  return phi;
}

/// Potential and L = K / h^2 for the control-cost equation.
inline QuadraticPotential cost_potential(const SupCbiModel& model, const MarkovianLift& lift,
                                         const ControlPoint& cp) {
  detail::check_point(cp);
  const std::size_t n = lift.size();
  const double d = model.D();
  const double h = cp.h;
  const double q = cp.q;
  const double am1 = model.A() * model.M1();
  const double am2 = model.A() * model.M2();
  const double bm2 = model.B() * model.M2();

  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = lift.rate(i) / h;

  QuadraticPotential psi;
  psi.dim = n + 1;
  psi.a.assign(psi.dim * psi.dim, 0.0);
  psi.b.assign(psi.dim, 0.0);

  auto cross_a = [&](std::size_t i, std::size_t j) {
    const double pi_d = p[i] * d;
    const double pj_d = p[j] * d;
    return (-(q - pi_d) * (q + pj_d) / (pj_d + 1.0) - (q - pj_d) * (q + pi_d) / (pi_d + 1.0) +
            2.0 * q * q) /
           (h * (p[i] + p[j]) * d);
  };

  psi.at(0, 0) = 1.0 / h;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = -(q + p[i] * d) / (h * (p[i] * d + 1.0));
    psi.at(0, i + 1) = v;
    psi.at(i + 1, 0) = v;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) psi.at(i + 1, j + 1) = cross_a(i, j);

  double s_ratio = 0.0;
  double s_p = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = lift.weight(k) / lift.rate(k);
    s_ratio += w * p[k] / (p[k] * d + 1.0);
    s_p += w * p[k];
  }
  const double b0 = -am1 * (q - 1.0) / h * s_ratio;
  psi.b[0] = b0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pid = p[i] * d;
    double cross = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = lift.weight(k) / lift.rate(k);
      cross += w * p[k] * cross_a(i, k) * h;
    }
    const double rhs = -q * (q - 1.0) * am1 * s_ratio +
                       0.5 * bm2 * (-(q + pid) * (q + pid) + (pid + q * q) * (pid + 1.0)) /
                           (d * (pid + 1.0)) -
                       am1 * (q + pid) / (pid + 1.0) * s_p + am1 * cross;
    psi.b[i + 1] = rhs / (lift.rate(i) * d) - b0;
  }

  double tail = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = lift.weight(i) / lift.rate(i);
    tail += w * p[i] * d / (p[i] * d + 1.0);
  }
  psi.constant = 0.5 * (1.0 - q) * (1.0 - q) * am2 / (d * d) * tail;
  return psi;
}

/// Residual of one equation at one state.
struct BkeEvaluation {
  double residual = 0.0;   // signed sum of all terms
  double max_term = 0.0;   // largest magnitude among the summed terms
};

/// Evaluates every term of the stationary equation
///
///   -C + cost(y) + (-h x + sum (rho - r_i) y_i) dPhi/dx - sum r_i y_i dPhi/dy_i
///      + sum (c_i A + r_i B y_i) int (Phi(y + z e_0 + z e_i) - Phi(y)) nu(dz) = 0
///
/// at `state` = (x, y_1, ..., y_n). For quadratic Phi the jump integral is
/// exactly M2 / 2 (a_00 + 2 a_0i + a_ii) + M1 (dPhi/dx + dPhi/dy_i).
inline BkeEvaluation bke_evaluate(const SupCbiModel& model, const MarkovianLift& lift,
                                  const ControlPoint& cp, const QuadraticPotential& phi,
                                  RunningCost cost, std::span<const double> state) {
  const std::size_t n = lift.size();
  if (phi.dim != n + 1 || state.size() != n + 1)
    throw InvalidArgument("bke: state and potential must have dimension n + 1");
  const double rho = cp.rho();
  const double x = state[0];

  std::vector<double> grad(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    double g = phi.b[j];
    for (std::size_t k = 0; k <= n; ++k) g += 0.5 * (phi.at(j, k) + phi.at(k, j)) * state[k];
    grad[j] = g;
  }

  double y_sum = 0.0;
  double drift = -cp.h * x;
  for (std::size_t i = 0; i < n; ++i) {
    y_sum += state[i + 1];
    drift += (rho - lift.rate(i)) * state[i + 1];
  }

  std::vector<double> terms;
  terms.reserve(n + 4);
  terms.push_back(-phi.constant);
  const double dev = cost == RunningCost::variance ? x - cp.x_hat : x - cp.q * y_sum;
  terms.push_back(dev * dev);
  terms.push_back(drift * grad[0]);
  double decay = 0.0;
  for (std::size_t i = 0; i < n; ++i) decay -= lift.rate(i) * state[i + 1] * grad[i + 1];
  terms.push_back(decay);
  for (std::size_t i = 0; i < n; ++i) {
    const double intensity =
        lift.weight(i) * model.A() + lift.rate(i) * model.B() * state[i + 1];
    const double curvature = phi.at(0, 0) + phi.at(0, i + 1) + phi.at(i + 1, 0) +
                             phi.at(i + 1, i + 1);
    terms.push_back(intensity *
                    (0.5 * model.M2() * curvature + model.M1() * (grad[0] + grad[i + 1])));
  }

  BkeEvaluation out;
  for (const double t : terms) {
    out.residual += t;
    out.max_term = std::max(out.max_term, std::abs(t));
  }
  return out;
}

struct BkeResidual {
  double max_abs = 0.0;  // max |residual| over states
  double max_rel = 0.0;  // max |residual| / largest term, over states
};

inline BkeResidual bke_residual(const SupCbiModel& model, const MarkovianLift& lift,
                                const ControlPoint& cp, const QuadraticPotential& phi,
                                RunningCost cost,
                                std::span<const std::vector<double>> states) {
  BkeResidual out;
  for (const auto& s : states) {
    const auto ev = bke_evaluate(model, lift, cp, phi, cost, s);
    const double abs_res = std::abs(ev.residual);
    out.max_abs = std::max(out.max_abs, abs_res);
    if (ev.max_term > 0.0) out.max_rel = std::max(out.max_rel, abs_res / ev.max_term);
  }
  return out;
}

/// Residual of the variance equation with the closed-form potential and J.
inline BkeResidual bke_residual_J(const SupCbiModel& model, const MarkovianLift& lift,
                                  const ControlPoint& cp,
                                  std::span<const std::vector<double>> states) {
  return bke_residual(model, lift, cp, variance_potential(model, lift, cp),
                      RunningCost::variance, states);
}

/// Residual of the control-cost equation with the closed-form potential and L.
inline BkeResidual bke_residual_K(const SupCbiModel& model, const MarkovianLift& lift,
                                  const ControlPoint& cp,
                                  std::span<const std::vector<double>> states) {
  return bke_residual(model, lift, cp, cost_potential(model, lift, cp),
                      RunningCost::control_cost, states);
}

/// States on the scale of the stationary process: the origin, each coordinate
/// alone over five decades, and `count` random states with x within three
/// standard deviations of x_hat and y_i within three component means. Linear
/// and constant coefficients are only visible against the quadratic terms at
/// such states.
inline std::vector<std::vector<double>> probe_states(const SupCbiModel& model,
                                                     const MarkovianLift& lift,
                                                     const ControlPoint& cp, int count, Rng& rng) {
  const std::size_t dim = lift.size() + 1;
  const double mean = stationary_mean(model, lift);
  const double sd = std::sqrt(stationary_variance(model, lift));
  std::vector<std::vector<double>> states;
  states.emplace_back(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    for (int k = -4; k <= 1; ++k) {
      std::vector<double> s(dim, 0.0);
      s[j] = mean * std::pow(10.0, k);
      states.push_back(std::move(s));
    }
  }
  for (int c = 0; c < count; ++c) {
    std::vector<double> s(dim);
    s[0] = cp.x_hat + sd * (6.0 * uniform_open(rng) - 3.0);
    for (std::size_t i = 1; i < dim; ++i) {
      const double component_mean =
          lift.weight(i - 1) * model.A() * model.M1() / (model.D() * lift.rate(i - 1));
      s[i] = 3.0 * component_mean * uniform_open(rng);
    }
    states.push_back(std::move(s));
  }
  return states;
}

/// Coefficient addresses of a potential, for perturbation checks.
struct CoefficientRef {
  enum class Kind { a, b, constant } kind;
  std::size_t j = 0;
  std::size_t k = 0;
};

/// Every independent coefficient: the upper triangle of a, all of b, and the constant.
inline std::vector<CoefficientRef> coefficient_refs(const QuadraticPotential& phi) {
  std::vector<CoefficientRef> refs;
  for (std::size_t j = 0; j < phi.dim; ++j)
    for (std::size_t k = j; k < phi.dim; ++k) refs.push_back({CoefficientRef::Kind::a, j, k});
  for (std::size_t j = 0; j < phi.dim; ++j) refs.push_back({CoefficientRef::Kind::b, j, 0});
  refs.push_back({CoefficientRef::Kind::constant, 0, 0});
  return refs;
}

/// Copy of `phi` with one coefficient scaled by `factor` (a stays symmetric).
inline QuadraticPotential perturbed(QuadraticPotential phi, const CoefficientRef& ref,
                                    double factor) {
  switch (ref.kind) {
    case CoefficientRef::Kind::a:
      phi.at(ref.j, ref.k) *= factor;
      if (ref.j != ref.k) phi.at(ref.k, ref.j) *= factor;
      break;
    case CoefficientRef::Kind::b:
      phi.b[ref.j] *= factor;
      break;
    case CoefficientRef::Kind::constant:
      phi.constant *= factor;
      break;
  }
  return phi;
}

}  // namespace supcbi
