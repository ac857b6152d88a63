#pragma once

// Two-stage identification of the model from a discharge series: the mixing
// measure from the empirical ACF, then the Levy measure, immigration scale
// and baseflow by moment matching with D held fixed.
//
// The nonlinear least-squares and simplex searches use GSL.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multifit_nlinear.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "supcbi/csv.hpp"
#include "supcbi/error.hpp"
#include "supcbi/lift.hpp"
#include "supcbi/measures.hpp"
#include "supcbi/model.hpp"
#include "supcbi/random.hpp"
#include "supcbi/simulate.hpp"

namespace supcbi {

/// Uniformly sampled non-negative discharge series.
class DischargeSeries {
 public:
  static constexpr std::size_t kMinLength = 100;

  DischargeSeries(double dt, std::vector<double> values) : dt_(dt), values_(std::move(values)) {
    if (!std::isfinite(dt) || !(dt > 0.0)) throw InvalidArgument("series: dt must be > 0");
    if (values_.size() < kMinLength)
      throw InvalidArgument("series: need at least " + std::to_string(kMinLength) + " values");
    for (const double v : values_)
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidArgument("series: values must be finite and >= 0");
  }

  double dt() const noexcept { return dt_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  double dt_;
  std::vector<double> values_;
};

namespace detail {

// Hours since 1970-01-01T00:00 for "YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z]".
inline std::optional<double> parse_iso_hours(const std::string& s) {
  int y = 0, mo = 0, d = 0, hh = 0, mm = 0;
  double ss = 0.0;
  char sep = 0;
  int consumed = 0;
  const int got = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d%n", &y, &mo, &d, &sep, &hh, &mm, &consumed);
  if (got < 6 || (sep != 'T' && sep != ' ')) return std::nullopt;
  std::string rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest[0] == ':') {
    int more = 0;
    if (std::sscanf(rest.c_str(), ":%lf%n", &ss, &more) != 1) return std::nullopt;
    rest = rest.substr(static_cast<std::size_t>(more));
  }
  if (!rest.empty() && rest != "Z") return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0.0 || ss >= 61.0)
    return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 24.0 + hh + mm / 60.0 + ss / 3600.0;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Reads CSV `timestamp,discharge_m3s`. Timestamps are hours (numeric) or ISO
/// date-times; spacing must be uniform to 1e-6 relative.
inline DischargeSeries read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("series: empty input");
  const auto header = csv::split(csv::trim(line));
  if (header.size() != 2 || csv::trim(header[0]) != "timestamp" ||
      csv::trim(header[1]) != "discharge_m3s")
    throw InvalidArgument("series: header must be `timestamp,discharge_m3s`");

  std::vector<double> times;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = csv::trim(line);
    if (body.empty()) continue;
    const auto fields = csv::split(body);
    if (fields.size() != 2)
      throw InvalidArgument("series: line " + std::to_string(line_no) + " needs two fields");
    const std::string ts(csv::trim(fields[0]));
    auto t = detail::parse_number(ts);
    if (!t) t = detail::parse_iso_hours(ts);
    if (!t) throw InvalidArgument("series: bad timestamp on line " + std::to_string(line_no));
    const auto v = detail::parse_number(std::string(csv::trim(fields[1])));
    if (!v) throw InvalidArgument("series: bad discharge on line " + std::to_string(line_no));
    times.push_back(*t);
    values.push_back(*v);
  }
  if (times.size() < 2) throw InvalidArgument("series: need at least two rows");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw InvalidArgument("series: timestamps must increase");
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double step = times[k] - times[k - 1];
    if (std::abs(step - dt) > 1e-6 * dt)
      throw InvalidArgument("series: non-uniform spacing at row " + std::to_string(k + 1));
  }
  return DischargeSeries(dt, std::move(values));
}

/// Sample ACF at lags 0..max_lag (in samples); requires max_lag < N / 4.
inline std::vector<double> empirical_acf(const DischargeSeries& series, std::size_t max_lag) {
  if (4 * max_lag >= series.size()) throw InvalidArgument("empirical_acf: max_lag must be < N/4");
  const auto stats = path_stats(series.values(), max_lag);
  if (stats.degenerate) throw InvalidArgument("empirical_acf: constant series");
  return stats.acf;
}

/// Lags 0..K where K is the last lag before the first non-positive value.
inline std::size_t positive_window(std::span<const double> acf) {
  std::size_t k = 0;
  while (k + 1 < acf.size() && acf[k + 1] > 0.0) ++k;
  return k;
}

struct AcfFit {
  double alpha = 0.0;
  double beta = 0.0;
  double d_beta = 0.0;      // the identifiable product D * beta
  std::size_t window = 0;   // last lag index used
  double rss = 0.0;
  bool degenerate = false;  // shape drifted to the exponential limit
};

inline constexpr double kDegenerateShape = 1e4;

namespace detail {

struct AcfData {
  const double* lag;
  const double* value;
  std::size_t size;
};

// Parameters (log k, log lambda) with k = alpha - 1 and lambda = k D beta:
// model (1 + lambda tau / k)^{-k}.
inline int acf_residual(const gsl_vector* p, void* data, gsl_vector* f) {
  const auto* d = static_cast<const AcfData*>(data);
  const double k = std::exp(gsl_vector_get(p, 0));
  const double lambda = std::exp(gsl_vector_get(p, 1));
  for (std::size_t j = 0; j < d->size; ++j)
    gsl_vector_set(f, j, std::pow(1.0 + lambda * d->lag[j] / k, -k) - d->value[j]);
  return GSL_SUCCESS;
}

inline int acf_jacobian(const gsl_vector* p, void* data, gsl_matrix* jac) {
  const auto* d = static_cast<const AcfData*>(data);
  const double k = std::exp(gsl_vector_get(p, 0));
  const double lambda = std::exp(gsl_vector_get(p, 1));
  for (std::size_t j = 0; j < d->size; ++j) {
    const double s = lambda * d->lag[j] / k;
    const double model = std::pow(1.0 + s, -k);
    gsl_matrix_set(jac, j, 0, model * k * (s / (1.0 + s) - std::log1p(s)));
    gsl_matrix_set(jac, j, 1, -model * k * s / (1.0 + s));
  }
  return GSL_SUCCESS;
}

inline double acf_rss(const AcfData& d, double k, double lambda) {
  double rss = 0.0;
  for (std::size_t j = 0; j < d.size; ++j) {
    const double r = std::pow(1.0 + lambda * d.lag[j] / k, -k) - d.value[j];
    rss += r * r;
  }
  return rss;
}

struct GslNlinearDeleter {
  void operator()(gsl_multifit_nlinear_workspace* w) const { gsl_multifit_nlinear_free(w); }
};
struct GslVectorDeleter {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
struct GslMinimizerDeleter {
  void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};

inline void quiet_gsl() { gsl_set_error_handler_off(); }

}  // namespace detail

/// Least-squares fit of (1 + D beta tau)^{-(alpha - 1)} to `acf` sampled every
/// `lag_step` hours, over the longest positive prefix.
inline AcfFit fit_acf(std::span<const double> acf, double lag_step, double D) {
  detail::quiet_gsl();
  if (acf.empty() || acf[0] != 1.0) throw InvalidArgument("fit_acf: acf(0) must equal 1");
  if (!(D > 0.0 && D < 1.0)) throw InvalidArgument("fit_acf: D must lie in (0, 1)");
  if (!(lag_step > 0.0)) throw InvalidArgument("fit_acf: lag step must be > 0");
  const std::size_t window = positive_window(acf);
  if (window < 2) throw NumericalFailure("fit_acf: positive ACF window has fewer than 3 lags");

  std::vector<double> lag(window + 1);
  for (std::size_t j = 0; j <= window; ++j) lag[j] = static_cast<double>(j) * lag_step;
  detail::AcfData data{lag.data(), acf.data(), window + 1};

  // Coarse grid for the starting point.
  const double tau_max = lag.back();
  double best_k = 1.0;
  double best_lambda = 1.0 / tau_max;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= 50; ++a) {
    const double k = std::pow(10.0, -2.0 + 5.0 * a / 50.0);
    for (int b = 0; b <= 80; ++b) {
      const double lambda = std::pow(10.0, -3.0 + 6.0 * b / 80.0) / tau_max;
      const double rss = detail::acf_rss(data, k, lambda);
      if (rss < best_rss) {
        best_rss = rss;
        best_k = k;
        best_lambda = lambda;
      }
    }
  }

  gsl_multifit_nlinear_fdf fdf;
  fdf.f = detail::acf_residual;
  fdf.df = detail::acf_jacobian;
  fdf.fvv = nullptr;
  fdf.n = data.size;
  fdf.p = 2;
  fdf.params = &data;
  gsl_multifit_nlinear_parameters params = gsl_multifit_nlinear_default_parameters();
  std::unique_ptr<gsl_multifit_nlinear_workspace, detail::GslNlinearDeleter> work(
      gsl_multifit_nlinear_alloc(gsl_multifit_nlinear_trust, &params, data.size, 2));
  std::unique_ptr<gsl_vector, detail::GslVectorDeleter> x0(gsl_vector_alloc(2));
  gsl_vector_set(x0.get(), 0, std::log(best_k));
  gsl_vector_set(x0.get(), 1, std::log(best_lambda));
  gsl_multifit_nlinear_init(x0.get(), &fdf, work.get());
  int info = 0;
  const int status = gsl_multifit_nlinear_driver(500, 1e-15, 1e-15, 0.0, nullptr, nullptr, &info,
                                                 work.get());
  const gsl_vector* sol = gsl_multifit_nlinear_position(work.get());
  const double k = std::exp(gsl_vector_get(sol, 0));
  const double lambda = std::exp(gsl_vector_get(sol, 1));
  if (!std::isfinite(k) || !std::isfinite(lambda))
    throw NumericalFailure("fit_acf: optimizer produced non-finite parameters");

  AcfFit fit;
  fit.window = window;
  fit.rss = detail::acf_rss(data, k, lambda);
  fit.degenerate = k > kDegenerateShape;
  if (status != GSL_SUCCESS && status != GSL_EMAXITER && !fit.degenerate)
    throw NumericalFailure(std::string("fit_acf: ") + gsl_strerror(status));
  fit.alpha = 1.0 + k;
  fit.d_beta = lambda / k;
  fit.beta = fit.d_beta / D;
  return fit;
}

/// Average, variance, skewness and kurtosis of the discharge.
struct MomentTargets {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = std::numeric_limits<double>::quiet_NaN();
  double kurtosis = std::numeric_limits<double>::quiet_NaN();
};

inline MomentTargets moment_targets(const DischargeSeries& series) {
  const auto s = path_stats(series.values());
  if (s.degenerate) throw InvalidArgument("fit_moments: constant series");
  return {s.mean, s.variance, s.skewness, s.kurtosis};
}

/// Settings for the Monte Carlo skewness and kurtosis of the full objective.
struct MonteCarloSettings {
  int replicates = 64;
  double horizon = 2000.0;  // hours per replicate
  double dt = 1.0;
  double eps = 1e-2;
  int lift_level = 4;
  std::uint64_t seed = 20240901;
};

struct MomentFitOptions {
  bool analytic = true;  // mean and variance terms only
  int restarts = 20;
  int lift_level = kDefaultLiftLevel;
  std::uint64_t seed = 7;
  MonteCarloSettings mc;
};

/// Model statistics of the discharge (baseflow included in the mean).
struct ModelMoments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = std::numeric_limits<double>::quiet_NaN();
  double kurtosis = std::numeric_limits<double>::quiet_NaN();
};

/// Skewness and kurtosis pooled over frozen-seed replicate simulations.
inline std::pair<double, double> monte_carlo_shape(const SupCbiModel& model,
                                                   const MonteCarloSettings& mc) {
  const MarkovianLift lift = build_lift(model.pi(), mc.lift_level);
  double n = 0.0;
  double s1 = 0.0;
  std::vector<std::vector<double>> paths;
  paths.reserve(static_cast<std::size_t>(mc.replicates));
  for (int r = 0; r < mc.replicates; ++r) {
    SimulationOptions opt;
    opt.horizon = mc.horizon;
    opt.dt = mc.dt;
    opt.eps = mc.eps;
    opt.seed = derive_seed(mc.seed, static_cast<std::uint64_t>(r));
    auto path = simulate(model, lift, opt);
    for (const double v : path.y_total) s1 += v;
    n += static_cast<double>(path.y_total.size());
    paths.push_back(std::move(path.y_total));
  }
  const double mean = s1 / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const auto& p : paths)
    for (const double v : p) {
      const double d = v - mean;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2)};
}

inline ModelMoments model_moments(const SupCbiModel& model, int lift_level,
                                  const std::optional<MonteCarloSettings>& mc) {
  const MarkovianLift lift = build_lift(model.pi(), lift_level);
  ModelMoments out;
  out.mean = model.baseflow() + stationary_mean(model, lift);
  out.variance = stationary_variance(model, lift);
  if (mc) std::tie(out.skewness, out.kurtosis) = monte_carlo_shape(model, *mc);
  return out;
}

struct StatisticRow {
  std::string name;
  double empirical;
  double model;
  double relative_error;  // (model - empirical) / empirical
};

struct FitReport {
  std::optional<SupCbiModel> model;
  std::size_t acf_window = 0;
  double E = 0.0;
  std::vector<double> terms;  // squared relative errors, in table order
  std::vector<StatisticRow> table;
  bool analytic = true;
};

/// Squared relative error terms: mean and variance always, shape terms in full mode.
inline std::vector<StatisticRow> statistic_rows(const MomentTargets& data, const ModelMoments& m,
                                                bool analytic) {
  std::vector<StatisticRow> rows;
  auto push = [&](const char* name, double emp, double mod) {
    rows.push_back({name, emp, mod, (mod - emp) / emp});
  };
  push("Average", data.mean, m.mean);
  push("Variance", data.variance, m.variance);
  if (!analytic) {
    push("Skewness", data.skewness, m.skewness);
    push("Kurtosis", data.kurtosis, m.kurtosis);
  }
  return rows;
}

/// Error metric from statistic rows; returns the sum and fills `terms`.
inline double error_metric(std::span<const StatisticRow> rows, std::vector<double>& terms) {
  terms.clear();
  double e = 0.0;
  for (const auto& row : rows) {
    const double t = row.relative_error * row.relative_error;
    terms.push_back(t);
    e += t;
  }
  return e;
}

/// Candidate (c1, c2, A, baseflow) with B pinned to (1 - D) / M1.
struct MomentParameters {
  double c1;
  double c2;
  double A;
  double baseflow;
};

inline SupCbiModel model_with_fixed_d(const MomentParameters& p, const GammaMixingMeasure& pi,
                                      double D) {
  const TemperedStableLevy nu(p.c1, p.c2);
  const double B = (1.0 - D) / nu.moment(1);
  return SupCbiModel(p.A, B, pi, nu, p.baseflow);
}

namespace detail {

// Unconstrained coordinates: c1 = 1 - e^{t0}, c2 = e^{t1}, A = e^{t2},
// baseflow = mean / (1 + e^{-t3}).
inline MomentParameters from_unconstrained(const double* t, double data_mean) {
  return {1.0 - std::exp(t[0]), std::exp(t[1]), std::exp(t[2]),
          data_mean / (1.0 + std::exp(-t[3]))};
}

struct MomentObjective {
  const MomentTargets* data;
  const GammaMixingMeasure* pi;
  double D;
  const MarkovianLift* lift;
  const MomentFitOptions* opt;
};

inline double moment_objective(const gsl_vector* v, void* params) {
  const auto* o = static_cast<const MomentObjective*>(params);
  const double t[4] = {gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2),
                       gsl_vector_get(v, 3)};
  try {
    const auto p = from_unconstrained(t, o->data->mean);
    const SupCbiModel model = model_with_fixed_d(p, *o->pi, o->D);
    ModelMoments m;
    m.mean = model.baseflow() + stationary_mean(model, *o->lift);
    m.variance = stationary_variance(model, *o->lift);
    if (!o->opt->analytic) std::tie(m.skewness, m.kurtosis) = monte_carlo_shape(model, o->opt->mc);
    std::vector<double> terms;
    const auto rows = statistic_rows(*o->data, m, o->opt->analytic);
    const double e = error_metric(rows, terms);
    return std::isfinite(e) ? e : GSL_POSINF;
  } catch (const Error&) {
    return GSL_POSINF;
  }
}

}  // namespace detail

/// Minimizes the moment error metric over (c1, c2, A, baseflow) with D fixed,
/// using Nelder-Mead from `restarts` random starting points.
inline FitReport fit_moments(const MomentTargets& data, double alpha, double beta, double D,
                             const MomentFitOptions& opt = {}) {
  detail::quiet_gsl();
  if (!(data.mean > 0.0) || !std::isfinite(data.mean))
    throw InvalidArgument("fit_moments: target mean must be > 0");
  if (!(data.variance > 0.0) || !std::isfinite(data.variance))
    throw InvalidArgument("fit_moments: target variance must be > 0 (degenerate series)");
  if (!opt.analytic && !(std::isfinite(data.skewness) && std::isfinite(data.kurtosis) &&
                         data.skewness != 0.0 && data.kurtosis != 0.0))
    throw InvalidArgument("fit_moments: full mode needs finite non-zero skewness and kurtosis");
  if (!(D > 0.0 && D < 1.0)) throw InvalidArgument("fit_moments: D must lie in (0, 1)");
  if (opt.restarts < 1) throw InvalidArgument("fit_moments: restarts must be >= 1");

  const GammaMixingMeasure pi(alpha, beta);
  const MarkovianLift lift = build_lift(pi, opt.lift_level);
  detail::MomentObjective obj{&data, &pi, D, &lift, &opt};

  gsl_multimin_function fn;
  fn.n = 4;
  fn.f = detail::moment_objective;
  fn.params = &obj;

  Rng rng(opt.seed);
  std::array<double, 4> best_t{};
  double best_e = std::numeric_limits<double>::infinity();
  std::unique_ptr<gsl_multimin_fminimizer, detail::GslMinimizerDeleter> minimizer(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4));
  std::unique_ptr<gsl_vector, detail::GslVectorDeleter> x(gsl_vector_alloc(4));
  std::unique_ptr<gsl_vector, detail::GslVectorDeleter> step(gsl_vector_alloc(4));
  gsl_vector_set_all(step.get(), 0.5);

  // Random (c1, c2) with c1 in (-1, 0.95) and c2 in (1e-4, 1); A and the
  // baseflow then match mean and variance exactly when that leaves a
  // baseflow share in [0.02, 0.98], else the share is clamped.
  const auto draw_start = [&](gsl_vector* t) {
    const double c1 = -1.0 + 1.95 * uniform_open(rng);
    const double c2 = std::exp(std::log(1e-4) + std::log(1e4) * uniform_open(rng));
    const TemperedStableLevy nu(c1, c2);
    const double a = 2.0 * data.variance * D * D / (nu.moment(2) * lift.inv_mean());
    const double share =
        std::clamp(1.0 - a * nu.moment(1) * lift.inv_mean() / (D * data.mean), 0.02, 0.98);
    gsl_vector_set(t, 0, std::log(1.0 - c1));
    gsl_vector_set(t, 1, std::log(c2));
    gsl_vector_set(t, 2, std::log(a));
    gsl_vector_set(t, 3, std::log(share / (1.0 - share)));
  };
  constexpr int kStartAttempts = 100;

  for (int r = 0; r < opt.restarts; ++r) {
    bool usable = false;
    for (int attempt = 0; attempt < kStartAttempts && !usable; ++attempt) {
      draw_start(x.get());
      usable = std::isfinite(detail::moment_objective(x.get(), &obj));
    }
    if (!usable) continue;
    gsl_multimin_fminimizer_set(minimizer.get(), &fn, x.get(), step.get());
    for (int it = 0; it < 5000; ++it) {
      if (gsl_multimin_fminimizer_iterate(minimizer.get()) != GSL_SUCCESS) break;
      if (minimizer->fval < 1e-20) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(minimizer.get()), 1e-10) ==
          GSL_SUCCESS)
        break;
    }
    if (minimizer->fval < best_e) {
      best_e = minimizer->fval;
      for (std::size_t k = 0; k < 4; ++k) best_t[k] = gsl_vector_get(minimizer->x, k);
    }
  }
  if (!std::isfinite(best_e)) throw NumericalFailure("fit_moments: no restart produced a finite error");

  FitReport report;
  report.analytic = opt.analytic;
  const auto p = detail::from_unconstrained(best_t.data(), data.mean);
  report.model = model_with_fixed_d(p, pi, D);
  std::optional<MonteCarloSettings> mc;
  if (!opt.analytic) mc = opt.mc;
  const ModelMoments m = model_moments(*report.model, opt.lift_level, mc);
  report.table = statistic_rows(data, m, opt.analytic);
  report.E = error_metric(report.table, report.terms);
  return report;
}

struct IdentifyOptions {
  double D = 0.5;
  std::optional<std::size_t> max_lag;  // default N/4 - 1
  MomentFitOptions moments;
};

struct Identification {
  AcfFit acf;
  MomentTargets targets;
  FitReport report;
};

/// ACF stage then moment stage.
inline Identification identify(const DischargeSeries& series, const IdentifyOptions& opt = {}) {
  const std::size_t max_lag = opt.max_lag.value_or(series.size() / 4 - 1);
  const auto acf = empirical_acf(series, max_lag);
  Identification out;
  out.acf = fit_acf(acf, series.dt(), opt.D);
  out.targets = moment_targets(series);
  out.report = fit_moments(out.targets, out.acf.alpha, out.acf.beta, opt.D, opt.moments);
  out.report.acf_window = out.acf.window;
  return out;
}

/// CSV `parameter,value` of the fitted model and the ACF stage.
inline void write_parameters_csv(std::ostream& os, const Identification& id) {
  const auto& m = *id.report.model;
  os << "parameter,value\n";
  os << "c1," << csv::num(m.nu().c1()) << '\n';
  os << "c2," << csv::num(m.nu().c2()) << '\n';
  os << "A," << csv::num(m.A()) << '\n';
  os << "B," << csv::num(m.B()) << '\n';
  os << "baseflow," << csv::num(m.baseflow()) << '\n';
  os << "alpha," << csv::num(m.pi().alpha()) << '\n';
  os << "Dbeta," << csv::num(id.acf.d_beta) << '\n';
  os << "beta," << csv::num(m.pi().beta()) << '\n';
  os << "D," << csv::num(m.D()) << '\n';
  os << "acf_window," << id.report.acf_window << '\n';
  os << "acf_degenerate," << (id.acf.degenerate ? 1 : 0) << '\n';
  os << "E," << csv::num(id.report.E) << '\n';
}

/// CSV `statistic,empirical,model,relative_error,term`.
inline void write_statistics_csv(std::ostream& os, const FitReport& report) {
  os << "statistic,empirical,model,relative_error,term\n";
  for (std::size_t k = 0; k < report.table.size(); ++k) {
    const auto& row = report.table[k];
    os << row.name << ',' << csv::num(row.empirical) << ',' << csv::num(row.model) << ','
       << csv::num(row.relative_error) << ',' << csv::num(report.terms[k]) << '\n';
  }
}

/// Parameter and statistics tables in the layout of a calibration summary.
inline void write_report_text(std::ostream& os, const Identification& id) {
  const auto& m = *id.report.model;
  char buf[160];
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "  %-18s %12.4e\n", name, v);
    os << buf;
  };
  os << "Parameter\n";
  line("c1 (-)", m.nu().c1());
  line("c2", m.nu().c2());
  line("A", m.A());
  line("B", m.B());
  line("baseflow (m3/s)", m.baseflow());
  line("alpha (-)", m.pi().alpha());
  line("Dbeta (1/h)", id.acf.d_beta);
  std::snprintf(buf, sizeof buf, "  ACF window: lags 0..%zu%s\n", id.report.acf_window,
                id.acf.degenerate ? " (shape at exponential limit)" : "");
  os << buf;
  std::snprintf(buf, sizeof buf, "\n%-18s %12s %12s\n", "Statistics", "Empirical", "Model");
  os << buf;
  for (const auto& row : id.report.table) {
    std::snprintf(buf, sizeof buf, "%-18s %12.4e %12.4e\n", row.name.c_str(), row.empirical,
                  row.model);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "\nE = %.6e (%s)\n", id.report.E,
                id.report.analytic ? "mean and variance terms" : "all four terms");
  os << buf;
}

}  // namespace supcbi
