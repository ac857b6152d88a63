#pragma once

// Monte Carlo simulation of the lifted supCBI system, optionally under the
// static feedback controller, and summary statistics of recorded paths.
//
// Components of the lift are driven by independent Poisson random measures
// and the shifted controlled process splits as X = sum_i X_i with
//
//   dX_i = (-h X_i + (rho - r_i) Y_i) dt + dY_i,
//
// so each component and its share of X are simulated on their own and summed
// on the recording grid. Between jumps both decay in closed form; jump times
// come from thinning against the current intensity, which cannot increase
// before the next jump.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "supcbi/csv.hpp"
#include "supcbi/error.hpp"
#include "supcbi/lift.hpp"
#include "supcbi/measures.hpp"
#include "supcbi/model.hpp"
#include "supcbi/random.hpp"

namespace supcbi {

/// Static feedback parameters; W is fixed at zero.
struct Controller {
  double rho;
  double u;
  double x_hat;  // target of the shifted process, used only for reporting deviations

  double h() const { return rho - u; }
};

struct SimulationOptions {
  double horizon = 1000.0;  // recorded time span (hours)
  double dt = 1.0;          // recording interval (hours)
  double eps = 1e-3;        // jumps below eps are dropped
  std::uint64_t seed = 1;
  std::optional<Controller> controller;
  bool record_components = false;
  /// Discarded warm-up; default 10 / min(r_1, h).
  std::optional<double> burn_in;
  /// Upper limit on the expected number of simulated jumps.
  double max_expected_jumps = 5e7;
};

struct SimulatedPath {
  double dt = 0.0;
  double horizon = 0.0;
  double burn_in = 0.0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t jumps = 0;
  std::vector<double> y_total;
  std::vector<std::vector<double>> y_components;  // [component][step], if requested
  std::vector<double> x;       // empty when uncontrolled
  std::vector<double> c_rate;  // empty when uncontrolled
  std::optional<Controller> controller;

  std::size_t steps() const noexcept { return y_total.size(); }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
};

/// Expected number of jumps of size >= eps over `span` time units at stationarity.
inline double expected_jump_count(const SupCbiModel& model, double eps, double span) {
  const double d_eps = 1.0 - model.B() * model.nu().truncated_moment(1, eps);
  return span * model.nu().tail_mass(eps) * model.A() / d_eps;
}

namespace detail {

// e^{-a t} (1 - e^{-(b - a) t}) / (b - a) for b >= a, i.e. int_0^t e^{-a (t - s)} e^{-b s} ds
// written without cancellation or overflow.
inline double decay_convolution(double rate_x, double rate_y, double t) {
  const double lo = std::min(rate_x, rate_y);
  const double gap = std::abs(rate_x - rate_y) * t;
  const double phi = gap == 0.0 ? 1.0 : -std::expm1(-gap) / gap;
  return std::exp(-lo * t) * t * phi;
}

}  // namespace detail

inline SimulatedPath simulate(const SupCbiModel& model, const MarkovianLift& lift,
                              const SimulationOptions& opt) {
  if (!std::isfinite(opt.dt) || !(opt.dt > 0.0)) throw InvalidArgument("simulate: dt must be > 0");
  if (!std::isfinite(opt.horizon) || !(opt.horizon >= opt.dt))
    throw InvalidArgument("simulate: horizon must be >= dt");
  if (!std::isfinite(opt.eps) || !(opt.eps > 0.0))
    throw InvalidArgument("simulate: eps must be > 0");
  const bool controlled = opt.controller.has_value();
  double h = 0.0;
  double rho = 0.0;
  if (controlled) {
    rho = opt.controller->rho;
    h = opt.controller->h();
    if (!std::isfinite(rho) || !std::isfinite(h) || !(h > 0.0))
      throw InvalidArgument("simulate: controller needs rho > u");
  }

  double slowest = lift.rate(0);
  if (controlled) slowest = std::min(slowest, h);
  const double burn_in = opt.burn_in.value_or(10.0 / slowest);
  if (!std::isfinite(burn_in) || burn_in < 0.0)
    throw InvalidArgument("simulate: burn-in must be >= 0");

  const double expected = expected_jump_count(model, opt.eps, burn_in + opt.horizon);
  if (!(expected <= opt.max_expected_jumps))
    throw InvalidArgument("simulate: eps = " + csv::short_num(opt.eps) + " implies about " +
                          csv::short_num(expected) + " jumps, above the budget of " +
                          csv::short_num(opt.max_expected_jumps));

  const auto steps = static_cast<std::size_t>(std::floor(opt.horizon / opt.dt + 1e-9)) + 1;
  SimulatedPath path;
  path.dt = opt.dt;
  path.horizon = static_cast<double>(steps - 1) * opt.dt;
  path.burn_in = burn_in;
  path.eps = opt.eps;
  path.seed = opt.seed;
  path.controller = opt.controller;
  path.y_total.assign(steps, 0.0);
  if (controlled) {
    path.x.assign(steps, 0.0);
    path.c_rate.assign(steps, 0.0);
  }
  if (opt.record_components) path.y_components.assign(lift.size(), {});

  const TemperedStableLevy& nu = model.nu();
  const double hard_limit = 4.0 * opt.max_expected_jumps + 1e6;

  for (std::size_t i = 0; i < lift.size(); ++i) {
    Rng rng(derive_seed(opt.seed, i));
    TruncatedJumpSampler jumps(nu, opt.eps);
    const double r = lift.rate(i);
    const double base = lift.weight(i) * model.A() * jumps.mass();
    const double slope = r * model.B() * jumps.mass();
    const double drift_x = rho - r;

    std::vector<double>* comp = opt.record_components ? &path.y_components[i] : nullptr;
    if (comp) comp->assign(steps, 0.0);

    double y = 0.0;
    double xi = 0.0;
    double t = -burn_in;
    std::size_t next = 0;

    // Free evolution of (y, xi) over a jump-free span of length tau.
    auto evolve = [&](double tau) {
      if (controlled) xi = xi * std::exp(-h * tau) + drift_x * y * detail::decay_convolution(h, r, tau);
      y *= std::exp(-r * tau);
    };
    auto record_until = [&](double t_end) {
      while (next < steps) {
        const double tk = static_cast<double>(next) * opt.dt;
        if (tk > t_end) break;
        evolve(tk - t);
        t = tk;
        path.y_total[next] += y;
        if (comp) (*comp)[next] = y;
        if (controlled) {
          path.x[next] += xi;
          path.c_rate[next] += -h * xi + rho * y;
        }
        ++next;
      }
    };

    const double t_last = path.horizon;
    while (next < steps) {
      const double bound = base + slope * y;
      if (!(bound > 0.0)) {
        record_until(t_last);
        break;
      }
      const double t_prop = t + exponential(rng, bound);
      record_until(std::min(t_prop, t_last));
      if (t_prop > t_last) break;
      evolve(t_prop - t);
      t = t_prop;
      const double accept = (base + slope * y) / bound;
      if (uniform_open(rng) < accept) {
        const double z = jumps(rng);
        y += z;
        xi += z;
        if (++path.jumps > hard_limit)
          throw NumericalFailure("simulate: jump count far above its expectation");
      }
      if (!std::isfinite(y) || !std::isfinite(xi))
        throw NumericalFailure("simulate: non-finite state");
    }
  }
  return path;
}

/// CSV `t,y_total,x,c_rate`; x and c_rate are empty for uncontrolled paths.
inline void write_path_csv(std::ostream& os, const SimulatedPath& path) {
  os << "t,y_total,x,c_rate\n";
  const bool controlled = !path.x.empty();
  for (std::size_t k = 0; k < path.steps(); ++k) {
    os << csv::num(path.time(k)) << ',' << csv::num(path.y_total[k]) << ',';
    if (controlled) os << csv::num(path.x[k]) << ',' << csv::num(path.c_rate[k]);
    else os << ',';
    os << '\n';
  }
}

struct PathStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = std::numeric_limits<double>::quiet_NaN();
  double kurtosis = std::numeric_limits<double>::quiet_NaN();  // standardized fourth moment
  std::vector<double> acf;  // lags 0..max_lag, empty when degenerate
  bool degenerate = false;  // zero variance: skewness, kurtosis and ACF undefined
};

/// Sample moments and ACF (autocovariance over the sample variance, 1/N normalization).
inline PathStats path_stats(std::span<const double> v, std::size_t max_lag = 0) {
  const std::size_t n = v.size();
  if (n < 2) throw InvalidArgument("path_stats: need at least two samples");
  if (max_lag >= n) throw InvalidArgument("path_stats: max_lag must be below the length");
  PathStats s;
  double sum = 0.0;
  for (const double x : v) sum += x;
  s.mean = sum / static_cast<double>(n);
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (const double x : v) {
    const double d = x - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double nn = static_cast<double>(n);
  s.variance = m2 / (nn - 1.0);
  if (!(m2 > 0.0)) {
    s.degenerate = true;
    return s;
  }
  const double pop_var = m2 / nn;
  s.skewness = (m3 / nn) / std::pow(pop_var, 1.5);
  s.kurtosis = (m4 / nn) / (pop_var * pop_var);
  s.acf.resize(max_lag + 1);
  s.acf[0] = 1.0;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t k = 0; k + lag < n; ++k) c += (v[k] - s.mean) * (v[k + lag] - s.mean);
    s.acf[lag] = c / m2;
  }
  return s;
}

/// Time average of a stationary series with a batch-means standard error.
struct TimeAverage {
  double mean = 0.0;
  double std_error = 0.0;
};

inline TimeAverage batch_mean(std::span<const double> v, std::size_t batches = 50) {
  if (batches < 2 || v.size() < 2 * batches)
    throw InvalidArgument("batch_mean: series too short for the batch count");
  const std::size_t len = v.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t k = b * len; k < (b + 1) * len; ++k) s += v[k];
    means[b] = s / static_cast<double>(len);
  }
  TimeAverage out;
  for (const double m : means) out.mean += m;
  out.mean /= static_cast<double>(batches);
  double ss = 0.0;
  for (const double m : means) ss += (m - out.mean) * (m - out.mean);
  out.std_error = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  return out;
}

/// Long-run averages of a controlled path against the closed forms.
struct ControlledAverages {
  TimeAverage y;          // Y_n
  TimeAverage deviation;  // (X - x_hat)^2, estimates J
  TimeAverage cost;       // c^2, estimates K
  TimeAverage modification;  // (X - Y_n)^2, estimates P
};

inline ControlledAverages controlled_averages(const SimulatedPath& path,
                                              std::size_t batches = 50) {
  if (!path.controller || path.x.empty())
    throw InvalidArgument("controlled_averages: path has no controller");
  const double x_hat = path.controller->x_hat;
  std::vector<double> dev(path.steps());
  std::vector<double> cost(path.steps());
  std::vector<double> mod(path.steps());
  for (std::size_t k = 0; k < path.steps(); ++k) {
    dev[k] = (path.x[k] - x_hat) * (path.x[k] - x_hat);
    cost[k] = path.c_rate[k] * path.c_rate[k];
    mod[k] = (path.x[k] - path.y_total[k]) * (path.x[k] - path.y_total[k]);
  }
  return {batch_mean(path.y_total, batches), batch_mean(dev, batches), batch_mean(cost, batches),
          batch_mean(mod, batches)};
}

}  // namespace supcbi
