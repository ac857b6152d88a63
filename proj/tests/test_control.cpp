#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "supcbi/config.hpp"
#include "supcbi/control.hpp"

using namespace supcbi;

namespace {

SupCbiModel table_model(const std::string& name) {
  return model_from_config(
      RunConfig::load(std::string(SUPCBI_CONFIGS) + "/calibrated/" + name + ".cfg"));
}

double table_qabs(const std::string& name) {
  return RunConfig::load(std::string(SUPCBI_CONFIGS) + "/calibrated/" + name + ".cfg").number("Qabs");
}

struct Moments {
  double J;
  double K;
  double P;
  double mean_x;
  double mean_y;
};

// Stationary first and second moments of Z = (X, y_1..y_n) under the
// controlled lifted dynamics, from the linear equations the generator gives:
//   drift  dX = (-h X + sum (rho - r_i) y_i) dt,  dy_i = -r_i y_i dt,
//   jumps  z (e_0 + e_i) at intensity (c_i A + r_i B y_i) nu(dz).
Moments stationary_oracle(const SupCbiModel& model, const MarkovianLift& lift, double q, double h) {
  const int n = static_cast<int>(lift.size());
  const int dim = n + 1;
  const double rho = q * h;
  const double m1 = model.M1();
  const double m2 = model.M2();
  const double a = model.A();
  const double b = model.B();

  Eigen::MatrixXd drift = Eigen::MatrixXd::Zero(dim, dim);
  drift(0, 0) = -h;
  std::vector<Eigen::VectorXd> v(n, Eigen::VectorXd::Zero(dim));
  for (int i = 0; i < n; ++i) {
    const double r = lift.rate(i);
    drift(0, i + 1) = rho - r;
    drift(i + 1, i + 1) = -r;
    v[i](0) = 1.0;
    v[i](i + 1) = 1.0;
  }

  // 0 = drift m + M1 sum v_i (c_i A + r_i B m_i)
  Eigen::MatrixXd mean_op = drift;
  Eigen::VectorXd mean_rhs = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    mean_op.col(i + 1) += m1 * lift.rate(i) * b * v[i];
    mean_rhs -= m1 * lift.weight(i) * a * v[i];
  }
  const Eigen::VectorXd mean = mean_op.fullPivLu().solve(mean_rhs);

  // 0 = drift S + S drift^T + M1 sum [lam_i v_i^T + v_i lam_i^T] + M2 sum E[intensity_i] v_i v_i^T,
  // with lam_i = E[intensity_i Z] = c_i A m + r_i B S e_i; solved in vectorized form.
  const auto apply = [&](const Eigen::MatrixXd& s) {
    Eigen::MatrixXd out = drift * s + s * drift.transpose();
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd lam = lift.rate(i) * b * s.col(i + 1);
      out += m1 * (lam * v[i].transpose() + v[i] * lam.transpose());
    }
    return out;
  };
  Eigen::MatrixXd op(dim * dim, dim * dim);
  for (int k = 0; k < dim * dim; ++k) {
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(dim, dim);
    basis(k % dim, k / dim) = 1.0;
    op.col(k) = apply(basis).reshaped();
  }
  Eigen::MatrixXd constant = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd lam = lift.weight(i) * a * mean;
    constant += m1 * (lam * v[i].transpose() + v[i] * lam.transpose());
    const double intensity = lift.weight(i) * a + lift.rate(i) * b * mean(i + 1);
    constant += m2 * intensity * v[i] * v[i].transpose();
  }
  const Eigen::VectorXd flat = op.fullPivLu().solve(-constant.reshaped().eval());
  const Eigen::MatrixXd second = flat.reshaped(dim, dim);

  Eigen::VectorXd ones_y = Eigen::VectorXd::Ones(dim);
  ones_y(0) = 0.0;
  const double mean_y = ones_y.dot(mean);
  const double x_hat = q * mean_y;

  Eigen::VectorXd control = rho * ones_y;
  control(0) = -h;
  Eigen::VectorXd modification = -ones_y;
  modification(0) = 1.0;

  return {second(0, 0) - 2.0 * x_hat * mean(0) + x_hat * x_hat,
          control.dot(second * control), modification.dot(second * modification), mean(0), mean_y};
}

SupCbiModel test_model(double B) {
  return SupCbiModel(0.7, B, GammaMixingMeasure(2.2, 0.4), TemperedStableLevy(0.4, 0.8), 0.3);
}

void expect_rel(double actual, double expect, double tol, const std::string& what) {
  EXPECT_LE(std::abs(actual - expect), tol * std::abs(expect))
      << what << ": " << actual << " vs " << expect;
}

}  // namespace

TEST(ControlEvaluator, MatchesStationaryMomentOracle) {
  for (const double B : {0.0, 0.5}) {
    const auto model = test_model(B);
    for (const int m : {0, 1, 2, 3}) {
      const auto lift = m == 0 ? MarkovianLift({model.pi().quantile(0.5)}, {1.0})
                               : build_lift(model.pi(), m);
      const ControlEvaluator ev(model, lift);
      for (const double q : {0.2, 0.58, 1.3}) {
        for (const double h : {1e-3, 0.05, 0.7, 12.0}) {
          const auto oracle = stationary_oracle(model, lift, q, h);
          const std::string tag = "B=" + std::to_string(B) + " m=" + std::to_string(m) +
                                  " q=" + std::to_string(q) + " h=" + std::to_string(h);
          expect_rel(ev.J(q, h), oracle.J, 1e-9, "J " + tag);
          expect_rel(ev.K(q, h), oracle.K, 1e-8, "K " + tag);
          expect_rel(ev.P(q, h), oracle.P, 1e-9, "P " + tag);
          expect_rel(ev.mean(), oracle.mean_y, 1e-11, "mean " + tag);
          expect_rel(oracle.mean_x, q * oracle.mean_y, 1e-9, "mean X " + tag);
        }
      }
    }
  }
}

TEST(ControlEvaluator, FreeFunctionsAgree) {
  const auto model = test_model(0.5);
  const auto lift = build_lift(model.pi(), 4);
  const ControlEvaluator ev(model, lift);
  EXPECT_EQ(eval_J(model, lift, 0.6, 0.3), ev.J(0.6, 0.3));
  EXPECT_EQ(eval_K(model, lift, 0.6, 0.3), ev.K(0.6, 0.3));
  EXPECT_EQ(eval_P(model, lift, 0.6, 0.3), ev.P(0.6, 0.3));
  EXPECT_EQ(ev.mean(), stationary_mean(model, lift));
  EXPECT_EQ(ev.variance(), stationary_variance(model, lift));
}

TEST(ControlEvaluator, LimitIdentities) {
  const auto model = table_model("period1_point180");
  const auto lift = build_lift(model.pi(), 13);
  const ControlEvaluator ev(model, lift);
  const double var = ev.variance();
  const double inf = std::numeric_limits<double>::infinity();
  for (const double h : {0.0, 1e-3, 0.1, 10.0, 1e4}) {
    EXPECT_NEAR(ev.J(1.0, h), var, 1e-12 * var);
    EXPECT_EQ(ev.K(1.0, h), 0.0);
    EXPECT_EQ(ev.P(1.0, h), 0.0);
  }
  for (const double q : {0.2, 0.58, 2.0}) {
    EXPECT_NEAR(ev.J(q, 0.0), var, 1e-12 * var);
    EXPECT_EQ(ev.K(q, 0.0), 0.0);
    EXPECT_NEAR(ev.P(q, 0.0), ev.P_lower(q), 1e-12 * ev.P_lower(q));
    EXPECT_EQ(ev.J(q, inf), q * q * var);
    EXPECT_EQ(ev.K(q, inf), inf);
    EXPECT_EQ(ev.P(q, inf), ev.P_upper(q));
    EXPECT_NEAR(ev.J(q, 1e12), q * q * var, 1e-6 * var);
    EXPECT_NEAR(ev.P(q, 1e12), ev.P_upper(q), 1e-6 * ev.P_upper(q));
  }
  EXPECT_THROW(ev.J(0.0, 1.0), InvalidArgument);
  EXPECT_THROW(ev.K(0.5, -1.0), InvalidArgument);
  EXPECT_THROW(ev.P(0.5, std::nan("")), InvalidArgument);
}

TEST(ControlEvaluator, BoundsAndMonotonicity) {
  const auto model = table_model("period2_point60");
  const auto lift = build_lift(model.pi(), 10);
  const ControlEvaluator ev(model, lift);
  const double var = ev.variance();
  for (const double q : {0.3, 0.7}) {
    double j_prev = ev.J(q, 0.0);
    double k_prev = 0.0;
    double p_prev = ev.P(q, 0.0);
    for (double h = 1e-4; h < 1e4; h *= 1.5) {
      const double j = ev.J(q, h);
      const double k = ev.K(q, h);
      const double p = ev.P(q, h);
      EXPECT_LT(j, j_prev);
      EXPECT_GT(j, q * q * var);
      EXPECT_LT(j, var);
      EXPECT_GT(k, k_prev);
      EXPECT_GT(p, p_prev);
      EXPECT_GT(p, ev.P_lower(q));
      EXPECT_LT(p, ev.P_upper(q));
      j_prev = j;
      k_prev = k;
      p_prev = p;
    }
  }
  // For q > 1 the deviation grows with h.
  EXPECT_GT(ev.J(1.5, 1.0), ev.J(1.5, 0.1));
}

TEST(Target, QFromTarget) {
  const auto model = table_model("period1_point180");
  const auto lift = build_lift(model.pi(), 13);
  const double inflow = model.baseflow() + stationary_mean(model, lift);
  EXPECT_NEAR(inflow, 11.90, 0.12);
  EXPECT_NEAR(q_from_target(model, lift, Target::abstraction(5.0)), 1.0 - 5.0 / inflow, 1e-15);
  EXPECT_NEAR(q_from_target(model, lift, Target::abstraction(5.0)), 0.5798, 5e-3);
  EXPECT_DOUBLE_EQ(q_from_target(model, lift, Target::discharge(inflow)), 1.0);
  EXPECT_DOUBLE_EQ(q_from_target(model, lift, Target::abstraction(0.0)), 1.0);
  EXPECT_THROW(q_from_target(model, lift, Target::abstraction(inflow + 1.0)), Infeasible);
  EXPECT_THROW(q_from_target(model, lift, Target::discharge(0.0)), Infeasible);
  EXPECT_THROW(q_from_target(model, lift, Target::abstraction(-1.0)), InvalidArgument);
}

TEST(SolveHbar, RoundTripsThroughK) {
  const auto model = table_model("period1_point20");
  const auto lift = build_lift(model.pi(), 13);
  const ControlEvaluator ev(model, lift);
  for (const double q : {0.1, 0.58, 0.95, 1.4}) {
    for (const double kbar : {1e-6, 1e-2, 1.0, 100.0, 1e5}) {
      const double h = solve_hbar(ev, q, kbar);
      EXPECT_NEAR(ev.K(q, h) / kbar, 1.0, 1e-10) << q << " " << kbar;
      EXPECT_NEAR(solve_hbar_bisection(ev, q, kbar) / h, 1.0, 1e-10) << q << " " << kbar;
    }
  }
  EXPECT_THROW(solve_hbar(ev, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(solve_hbar(ev, 0.5, 0.0), InvalidArgument);
  EXPECT_THROW(solve_hbar(ev, 0.5, -1.0), InvalidArgument);
  EXPECT_EQ(solve_hbar(model, lift, 0.5, 1.0), solve_hbar(ev, 0.5, 1.0));
}

TEST(SolveHbar, Asymptotes) {
  const auto model = table_model("period1_point180");
  const auto lift = build_lift(model.pi(), 13);
  const ControlEvaluator ev(model, lift);
  const double q = 0.58;
  const double g = (1.0 - q) * (1.0 - q) * ev.variance();
  // Small Kbar: every ratio r_i D / (r_i D + h) tends to 1.
  const double small = 1e-10;
  EXPECT_NEAR(solve_hbar(ev, q, small) / std::sqrt(small / g), 1.0, 1e-4);
  // Large Kbar: K ~ h (1-q)^2 Var D / R_n.
  const double large = 1e12;
  const double slope = g * ev.D() / ev.inv_mean();
  EXPECT_NEAR(solve_hbar(ev, q, large) * slope / large, 1.0, 1e-4);
  // Increasing in Kbar.
  double prev = 0.0;
  for (double kbar = 1e-4; kbar < 1e6; kbar *= 3.0) {
    const double h = solve_hbar(ev, q, kbar);
    EXPECT_GT(h, prev);
    prev = h;
  }
}

TEST(SolveHVariability, InvertsP) {
  const auto model = table_model("period1_point180");
  const auto lift = build_lift(model.pi(), 13);
  const ControlEvaluator ev(model, lift);
  const double q = 0.58;
  const double lo = ev.P_lower(q);
  const double hi = ev.P_upper(q);
  for (const double t : {0.01, 0.3, 0.9}) {
    const double pbar = lo + t * (hi - lo);
    EXPECT_NEAR(ev.P(q, solve_h_variability(ev, q, pbar)) / pbar, 1.0, 1e-10);
  }
  EXPECT_EQ(solve_h_variability(ev, q, hi), std::numeric_limits<double>::infinity());
  EXPECT_EQ(solve_h_variability(ev, q, lo), 0.0);
  EXPECT_THROW(solve_h_variability(ev, q, 0.5 * lo), Infeasible);
}

namespace {

ControlProblem problem(const std::string& name, Target target, double kbar,
                       std::optional<double> pbar = std::nullopt) {
  const auto model = table_model(name);
  return {model, build_lift(model.pi(), 13), target, kbar, pbar};
}

}  // namespace

TEST(Solve, WaterAbstracting) {
  const auto p = problem("period1_point180", Target::abstraction(5.0), 1.0);
  const auto sol = solve(p);
  const ControlEvaluator ev(p.model, p.lift);
  EXPECT_EQ(sol.case_label, ControlCase::water_abstracting);
  EXPECT_EQ(to_string(sol.case_label), "WaterAbstracting");
  EXPECT_EQ(sol.active, ActiveConstraint::cost);
  EXPECT_TRUE(sol.attained);
  EXPECT_FALSE(sol.rho_arbitrary);
  EXPECT_NEAR(sol.K, 1.0, 1e-10);
  EXPECT_NEAR(sol.rho, sol.q * sol.hbar, 1e-15 * sol.rho);
  EXPECT_NEAR(sol.u, -(1.0 - sol.q) * sol.hbar, 1e-15 * sol.hbar);
  EXPECT_NEAR(sol.rho / (sol.rho - sol.u), sol.q, 1e-14);
  EXPECT_GT(sol.rho, sol.u);
  EXPECT_EQ(sol.J, ev.J(sol.q, sol.hbar));
  EXPECT_EQ(sol.x_hat, sol.q * ev.mean());
  EXPECT_FALSE(sol.P.has_value());
}

TEST(Solve, BalancedAnyRho) {
  const auto sol = solve(problem("period1_point180", Target::abstraction(0.0), 1.0, 50.0));
  EXPECT_EQ(sol.case_label, ControlCase::balanced);
  EXPECT_EQ(to_string(sol.case_label), "Balanced");
  EXPECT_TRUE(sol.rho_arbitrary);
  EXPECT_EQ(sol.K, 0.0);
  EXPECT_EQ(sol.u, 0.0);
  EXPECT_EQ(sol.active, ActiveConstraint::none);
  ASSERT_TRUE(sol.P.has_value());
  EXPECT_EQ(*sol.P, 0.0);
}

TEST(Solve, WaterAddingHasOnlyAnInfimum) {
  const auto p = problem("period1_point180", Target::discharge(15.0), 1.0);
  const auto sol = solve(p);
  EXPECT_EQ(sol.case_label, ControlCase::water_adding);
  EXPECT_EQ(to_string(sol.case_label), "WaterAdding");
  EXPECT_FALSE(sol.attained);
  EXPECT_GT(sol.q, 1.0);
  EXPECT_EQ(sol.hbar, 0.0);
  EXPECT_EQ(sol.J, ControlEvaluator(p.model, p.lift).variance());
  EXPECT_EQ(sol.active, ActiveConstraint::none);
}

TEST(Solve, VariabilityBoundCrossover) {
  const auto base = problem("period1_point180", Target::abstraction(5.0), 1.0);
  const ControlEvaluator ev(base.model, base.lift);
  const double q = q_from_target(base.model, base.lift, base.target);
  const double pbar = 100.0;
  ASSERT_GT(pbar, ev.P_lower(q));
  ASSERT_LT(pbar, ev.P_upper(q));
  const double h_var = solve_h_variability(ev, q, pbar);
  const double k_cross = ev.K(q, h_var);

  auto p = base;
  p.pbar = pbar;
  p.kbar = 0.5 * k_cross;
  auto sol = solve(p, ev);
  EXPECT_EQ(sol.active, ActiveConstraint::cost);
  EXPECT_LT(*sol.P, pbar);
  EXPECT_NEAR(sol.K, p.kbar, 1e-10 * p.kbar);

  p.kbar = 2.0 * k_cross;
  sol = solve(p, ev);
  EXPECT_EQ(sol.active, ActiveConstraint::variability);
  EXPECT_NEAR(*sol.P / pbar, 1.0, 1e-10);
  EXPECT_LT(sol.K, p.kbar);
  EXPECT_NEAR(sol.hbar / h_var, 1.0, 1e-12);

  // At Point 180 the example bound binds already at Kbar = 1.
  p.kbar = 1.0;
  EXPECT_EQ(solve(p, ev).active, ActiveConstraint::variability);
  EXPECT_EQ(to_string(ActiveConstraint::variability), "P");
  EXPECT_EQ(to_string(ActiveConstraint::cost), "K");
  EXPECT_EQ(to_string(ActiveConstraint::none), "none");
}

TEST(Solve, VariabilityBoundEdgeCases) {
  auto p = problem("period1_point180", Target::abstraction(5.0), 1.0);
  const ControlEvaluator ev(p.model, p.lift);
  const double q = q_from_target(p.model, p.lift, p.target);
  p.pbar = 0.5 * ev.P_lower(q);
  EXPECT_THROW(solve(p, ev), Infeasible);
  p.pbar = ev.P_lower(q);
  EXPECT_THROW(solve(p, ev), Infeasible);
  p.pbar = 2.0 * ev.P_upper(q);
  const auto sol = solve(p, ev);
  EXPECT_TRUE(sol.p_vacuous);
  EXPECT_EQ(sol.active, ActiveConstraint::cost);
  p.pbar = -1.0;
  EXPECT_THROW(solve(p, ev), InvalidArgument);
  p.pbar.reset();
  p.kbar = 0.0;
  EXPECT_THROW(solve(p, ev), InvalidArgument);
}

TEST(Sweep, MonotoneInKbarAndRecordsFailures) {
  const auto p = problem("period1_point180", Target::abstraction(5.0), 1.0);
  std::vector<double> kbars;
  for (int k = 1; k <= 40; ++k) kbars.push_back(0.25 * k);
  const auto rows = sweep(p, kbars);
  ASSERT_EQ(rows.size(), kbars.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ASSERT_TRUE(rows[k].solution.has_value());
    EXPECT_EQ(rows[k].kbar, kbars[k]);
    if (k > 0) {
      EXPECT_GT(rows[k].solution->hbar, rows[k - 1].solution->hbar);
      EXPECT_LT(rows[k].solution->J, rows[k - 1].solution->J);
    }
  }

  const std::vector<double> mixed{1.0, -2.0, 3.0};
  const auto with_error = sweep(p, mixed);
  ASSERT_EQ(with_error.size(), 3u);
  EXPECT_TRUE(with_error[0].solution.has_value());
  EXPECT_FALSE(with_error[1].solution.has_value());
  EXPECT_FALSE(with_error[1].error.empty());
  EXPECT_TRUE(with_error[2].solution.has_value());

  std::ostringstream os;
  write_sweep_csv(os, with_error, false);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "Kbar,hbar,rho,u,J,K,P,active_constraint");
  std::getline(in, line);
  EXPECT_EQ(line.substr(line.size() - 2), ",,");
  std::getline(in, line);
  EXPECT_EQ(line, "-2,,,,,,,error");
}

TEST(Continuum, EqualsFiniteLiftAtSameLevel) {
  const auto model = table_model("period2_point20");
  for (const int m : {3, 8, 13}) {
    const ControlEvaluator ev(model, build_lift(model.pi(), m));
    for (const double q : {0.3, 0.7}) {
      for (const double h : {0.0, 0.01, 1.0}) {
        const auto c = continuum_J_K_P(model, q, h, m);
        expect_rel(c.J, ev.J(q, h), 1e-12, "J");
        if (h > 0.0) expect_rel(c.K, ev.K(q, h), 1e-12, "K");
        expect_rel(c.P, ev.P(q, h), 1e-12, "P");
      }
    }
  }
  EXPECT_THROW(continuum_J_K_P(model, 0.0, 1.0, 4), InvalidArgument);
  EXPECT_THROW(continuum_J_K_P(model, 0.5, -1.0, 4), InvalidArgument);
}

TEST(Continuum, HbarSettlesWithLevel) {
  const auto model = table_model("period1_point20");
  const double q = 1.0 - table_qabs("period1_point20") /
                             (model.baseflow() + stationary_mean(model, build_lift(model.pi(), 13)));
  for (const double kbar : {0.1, 1.0, 10.0}) {
    const double h13 = continuum_hbar(model, q, kbar, 13);
    // Four significant digits are fixed from m = 13 on.
    for (const int m : {14, 15, 16})
      EXPECT_LT(std::abs(continuum_hbar(model, q, kbar, m) - h13), 5e-5 * h13) << kbar << " " << m;
    // Coarse levels are visibly further off than the resolution of the check.
    EXPECT_GT(std::abs(continuum_hbar(model, q, kbar, 2) - h13), 5e-5 * h13) << kbar;
  }
}
