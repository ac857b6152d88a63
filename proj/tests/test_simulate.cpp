#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "supcbi/control.hpp"
#include "supcbi/simulate.hpp"

using namespace supcbi;

namespace {

// Exponentially tempered jumps with c1 = 0: M1 = 1, M2 = 1.
SupCbiModel small_model(double A, double B) {
  return SupCbiModel(A, B, GammaMixingMeasure(2.0, 1.0), TemperedStableLevy(0.0, 1.0), 0.0);
}

SimulationOptions options(double horizon, double dt, double eps, std::uint64_t seed) {
  SimulationOptions opt;
  opt.horizon = horizon;
  opt.dt = dt;
  opt.eps = eps;
  opt.seed = seed;
  return opt;
}

void expect_within(const TimeAverage& avg, double expect, double z, const std::string& what) {
  EXPECT_LT(std::abs(avg.mean - expect), z * avg.std_error)
      << what << ": estimate " << avg.mean << " +- " << avg.std_error << ", expected " << expect;
}

}  // namespace

TEST(Simulate, ComponentsAreNonnegativeAndSumToTotal) {
  const auto model = small_model(0.5, 0.3);
  const auto lift = build_lift(model.pi(), 2);
  auto opt = options(2000.0, 0.5, 1e-3, 7);
  opt.record_components = true;
  const auto path = simulate(model, lift, opt);
  ASSERT_EQ(path.y_components.size(), lift.size());
  ASSERT_EQ(path.steps(), 4001u);
  EXPECT_GT(path.jumps, 0u);
  for (std::size_t k = 0; k < path.steps(); ++k) {
    double sum = 0.0;
    for (const auto& comp : path.y_components) {
      ASSERT_GE(comp[k], 0.0);
      sum += comp[k];
    }
    EXPECT_NEAR(sum, path.y_total[k], 1e-12 * std::max(1.0, sum));
  }
  EXPECT_TRUE(path.x.empty());
  EXPECT_TRUE(path.c_rate.empty());
}

TEST(Simulate, ShotNoiseMeanForSingleComponent) {
  const auto model = small_model(0.5, 0.0);
  const double r = 0.2;
  const MarkovianLift lift({r}, {1.0});
  const double eps = 1e-2;
  const auto path = simulate(model, lift, options(2e5, 1.0, eps, 3));
  const double expect = model.A() * model.nu().truncated_moment(1, eps) / r;
  expect_within(batch_mean(path.y_total), expect, 3.0, "shot-noise mean");
}

TEST(Simulate, MeanAndVarianceMatchTruncatedClosedForms) {
  const auto model = small_model(0.4, 0.4);
  const auto lift = build_lift(model.pi(), 2);
  const double eps = 1e-2;
  const auto cut = model.truncated(eps);
  const auto path = simulate(model, lift, options(4e5, 1.0, eps, 11));
  expect_within(batch_mean(path.y_total), stationary_mean(cut, lift), 3.0, "mean");

  const double mean = stationary_mean(cut, lift);
  std::vector<double> sq(path.steps());
  for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = (path.y_total[k] - mean) * (path.y_total[k] - mean);
  expect_within(batch_mean(sq), stationary_variance(cut, lift), 3.0, "variance");
}

TEST(Simulate, AutocorrelationMatchesLift) {
  const auto model = small_model(0.5, 0.0);
  const auto lift = build_lift(model.pi(), 2);
  const double eps = 1e-2;
  const auto cut = model.truncated(eps);
  const double dt = 0.5;
  const auto path = simulate(model, lift, options(2e5, dt, eps, 5));
  const auto stats = path_stats(path.y_total, 20);
  // Sampling error of the ACF at these lags is about 0.005 for this horizon.
  for (const std::size_t lag : {1u, 4u, 10u, 20u}) {
    const double tau = static_cast<double>(lag) * dt;
    EXPECT_NEAR(stats.acf[lag], acf_lift(cut, lift, tau), 0.015) << "lag " << lag;
  }
}

TEST(Simulate, ControlledAveragesMatchClosedForms) {
  const auto model = small_model(0.4, 0.3);
  const auto lift = build_lift(model.pi(), 2);
  const double eps = 1e-2;
  const auto cut = model.truncated(eps);
  const ControlEvaluator ev(cut, lift);
  const double q = 0.5;
  const double h = 0.8;
  auto opt = options(4e5, 0.25, eps, 13);
  opt.controller = Controller{q * h, -(1.0 - q) * h, q * ev.mean()};
  const auto path = simulate(model, lift, opt);
  ASSERT_EQ(path.x.size(), path.steps());
  const auto avg = controlled_averages(path);
  expect_within(avg.y, ev.mean(), 3.0, "mean");
  expect_within(avg.deviation, ev.J(q, h), 3.0, "J");
  expect_within(avg.cost, ev.K(q, h), 3.0, "K");
  expect_within(avg.modification, ev.P(q, h), 3.0, "P");
}

TEST(Simulate, DeterministicPerSeed) {
  const auto model = small_model(0.5, 0.2);
  const auto lift = build_lift(model.pi(), 3);
  auto opt = options(500.0, 1.0, 1e-3, 42);
  opt.controller = Controller{0.3, -0.2, 1.0};
  const auto a = simulate(model, lift, opt);
  const auto b = simulate(model, lift, opt);
  EXPECT_EQ(a.y_total, b.y_total);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.jumps, b.jumps);
  opt.seed = 43;
  EXPECT_NE(simulate(model, lift, opt).y_total, a.y_total);
}

TEST(Simulate, RejectsInvalidOptions) {
  const auto model = small_model(0.5, 0.2);
  const auto lift = build_lift(model.pi(), 2);
  EXPECT_THROW(simulate(model, lift, options(100.0, 0.0, 1e-3, 1)), InvalidArgument);
  EXPECT_THROW(simulate(model, lift, options(100.0, -1.0, 1e-3, 1)), InvalidArgument);
  EXPECT_THROW(simulate(model, lift, options(0.5, 1.0, 1e-3, 1)), InvalidArgument);
  EXPECT_THROW(simulate(model, lift, options(100.0, 1.0, 0.0, 1)), InvalidArgument);

  auto budget = options(1e6, 1.0, 1e-12, 1);
  budget.max_expected_jumps = 1e5;
  EXPECT_THROW(simulate(model, lift, budget), InvalidArgument);

  auto bad = options(100.0, 1.0, 1e-3, 1);
  bad.controller = Controller{0.2, 0.2, 0.0};
  EXPECT_THROW(simulate(model, lift, bad), InvalidArgument);
  bad.controller = Controller{0.1, 0.3, 0.0};
  EXPECT_THROW(simulate(model, lift, bad), InvalidArgument);
}

TEST(Simulate, BurnInDefaultsToSlowestRate) {
  const auto model = small_model(0.5, 0.0);
  const auto lift = build_lift(model.pi(), 2);
  EXPECT_DOUBLE_EQ(simulate(model, lift, options(10.0, 1.0, 1e-2, 1)).burn_in, 10.0 / lift.rate(0));
  auto opt = options(10.0, 1.0, 1e-2, 1);
  const double h = 0.5 * lift.rate(0);
  opt.controller = Controller{0.5 * h, -0.5 * h, 0.0};
  EXPECT_DOUBLE_EQ(simulate(model, lift, opt).burn_in, 10.0 / h);
}

TEST(Simulate, ExpectedJumpCount) {
  const auto model = small_model(0.5, 0.2);
  const double eps = 1e-2;
  const double d_eps = 1.0 - 0.2 * model.nu().truncated_moment(1, eps);
  EXPECT_NEAR(expected_jump_count(model, eps, 100.0),
              100.0 * model.nu().tail_mass(eps) * 0.5 / d_eps, 1e-10);
}

TEST(Simulate, DecayConvolutionMatchesQuadrature) {
  using boost::math::quadrature::gauss_kronrod;
  for (const double a : {0.0, 0.01, 0.7, 3.0, 40.0}) {
    for (const double b : {0.0, 0.01, 0.7, 3.0, 40.0}) {
      for (const double t : {1e-6, 0.1, 1.0, 5.0}) {
        const double oracle = gauss_kronrod<double, 61>::integrate(
            [&](double s) { return std::exp(-a * (t - s)) * std::exp(-b * s); }, 0.0, t, 15, 1e-14);
        EXPECT_NEAR(detail::decay_convolution(a, b, t) / oracle, 1.0, 1e-10)
            << a << " " << b << " " << t;
      }
    }
  }
}

TEST(Simulate, PathCsvLayout) {
  const auto model = small_model(0.5, 0.0);
  const auto lift = build_lift(model.pi(), 1);
  const auto path = simulate(model, lift, options(3.0, 1.0, 1e-2, 1));
  std::ostringstream os;
  write_path_csv(os, path);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,y_total,x,c_rate");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "0,");
  EXPECT_EQ(line.substr(line.size() - 2), ",,");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(PathStats, ConstantPathIsDegenerate) {
  const std::vector<double> v(100, 2.5);
  const auto s = path_stats(v, 5);
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_EQ(s.variance, 0.0);
  EXPECT_TRUE(s.degenerate);
  EXPECT_TRUE(std::isnan(s.skewness));
  EXPECT_TRUE(std::isnan(s.kurtosis));
  EXPECT_TRUE(s.acf.empty());
}

TEST(PathStats, RejectsShortInput) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(path_stats(one), InvalidArgument);
  const std::vector<double> three{1.0, 2.0, 3.0};
  EXPECT_THROW(path_stats(three, 3), InvalidArgument);
}

TEST(PathStats, StandardNormalSample) {
  std::mt19937_64 gen(20240601);
  std::normal_distribution<double> normal;
  const std::size_t n = 1000000;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(gen);
  const auto s = path_stats(v, 3);
  const double rn = std::sqrt(static_cast<double>(n));
  // Sampling standard deviations: 1, sqrt(2), sqrt(6), sqrt(24) over sqrt(n).
  EXPECT_LT(std::abs(s.mean), 3.0 / rn);
  EXPECT_LT(std::abs(s.variance - 1.0), 3.0 * std::sqrt(2.0) / rn);
  EXPECT_LT(std::abs(s.skewness), 3.0 * std::sqrt(6.0) / rn);
  EXPECT_LT(std::abs(s.kurtosis - 3.0), 3.0 * std::sqrt(24.0) / rn);
  EXPECT_EQ(s.acf[0], 1.0);
  for (std::size_t lag = 1; lag <= 3; ++lag) EXPECT_LT(std::abs(s.acf[lag]), 3.0 / rn);
}

TEST(PathStats, LinearRampAcfApproachesOne) {
  double prev = 0.0;
  for (const std::size_t n : {100u, 1000u, 10000u, 100000u}) {
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = static_cast<double>(k);
    const double acf1 = path_stats(v, 1).acf[1];
    EXPECT_GT(acf1, prev);
    prev = acf1;
  }
  EXPECT_GT(prev, 0.9999);
}

TEST(BatchMean, MatchesDirectComputation) {
  std::vector<double> v(1000);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k % 10);
  const auto avg = batch_mean(v, 10);
  EXPECT_NEAR(avg.mean, 4.5, 1e-12);
  EXPECT_NEAR(avg.std_error, 0.0, 1e-12);
  const std::vector<double> few(5, 1.0);
  EXPECT_THROW(batch_mean(few, 10), InvalidArgument);
}
