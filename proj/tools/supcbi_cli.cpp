// Command-line front end: lift, solve, sweep, simulate, identify, verify.
//
// Every command reads a strict key = value configuration, writes CSV files
// into --out and a short summary to stdout. Outputs depend only on the
// configuration and seed.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "supcbi/supcbi.hpp"

namespace fs = std::filesystem;
using namespace supcbi;

namespace {

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> m;
  bool quiet = false;
};

RunConfig load_config(const CommonOptions& opt) {
  RunConfig cfg = RunConfig::load(opt.config);
  if (opt.seed) cfg.set("seed", std::to_string(*opt.seed));
  if (opt.m) cfg.set("m", std::to_string(*opt.m));
  return cfg;
}

std::ofstream open_output(const CommonOptions& opt, const std::string& name) {
  fs::create_directories(opt.out);
  const fs::path path = fs::path(opt.out) / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write '" + path.string() + "'");
  return os;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

class Summary {
 public:
  explicit Summary(bool quiet) : quiet_(quiet) {}
  template <typename T>
  Summary& operator<<(const T& v) {
    if (!quiet_) std::cout << v;
    return *this;
  }

 private:
  bool quiet_;
};

std::uint64_t seed_of(const RunConfig& cfg) {
  return cfg.has("seed") ? cfg.unsigned_integer("seed") : 1;
}

// ---------------------------------------------------------------- lift

int cmd_lift(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  const GammaMixingMeasure pi = mixing_from_config(cfg);
  const int m = lift_level(cfg);
  const int m_min = static_cast<int>(cfg.integer_or("m_min", 6));
  const int m_max = static_cast<int>(cfg.integer_or("m_max", 13));
  if (m_min < 1 || m_max < m_min || m_max > kMaxLiftLevel)
    throw InvalidArgument("keys 'm_min', 'm_max': need 1 <= m_min <= m_max <= 16");

  const MarkovianLift lift = build_lift(pi, m);
  const auto rows = convergence_report(pi, m_min, m_max);
  {
    auto os = open_output(opt, "lift.csv");
    write_lift_csv(os, lift);
  }
  {
    auto os = open_output(opt, "convergence.csv");
    write_convergence_csv(os, rows);
  }
  Summary out(opt.quiet);
  out << "alpha = " << fmt("%g", pi.alpha()) << ", beta = " << fmt("%g", pi.beta())
      << ", R = " << fmt("%.6g", pi.inv_mean()) << "\n";
  out << "       n          R_n       e_n   rate\n";
  for (const auto& row : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%8zu  %11.6g  %8.6f  %5s\n", row.n, row.r_n, row.rel_error,
                  std::isnan(row.rate) ? "-" : fmt("%.3f", row.rate).c_str());
    out << buf;
  }
  out << "lift: n = " << lift.size() << ", R_n = " << fmt("%.6g", lift.inv_mean()) << "\n";
  return 0;
}

// ---------------------------------------------------------------- solve

void require_control_keys(const RunConfig& cfg) {
  require_model_keys(cfg);
  cfg.require_one_of("Qhat", "Qabs");
}

ControlProblem problem_from_config(const RunConfig& cfg, double kbar) {
  SupCbiModel model = model_from_config(cfg);
  MarkovianLift lift = build_lift(model.pi(), lift_level(cfg));
  return ControlProblem{model, lift, target_from_config(cfg), kbar, cfg.optional_number("Pbar")};
}

void write_solution_csv(std::ostream& os, const ControlSolution& s, const ControlEvaluator& ev) {
  os << "key,value\n";
  os << "case," << to_string(s.case_label) << '\n';
  os << "q," << csv::num(s.q) << '\n';
  os << "hbar," << csv::num(s.hbar) << '\n';
  os << "rho," << csv::num(s.rho) << '\n';
  os << "u," << csv::num(s.u) << '\n';
  os << "J," << csv::num(s.J) << '\n';
  os << "K," << csv::num(s.K) << '\n';
  os << "P," << (s.P ? csv::num(*s.P) : "") << '\n';
  os << "active_constraint," << (s.P ? to_string(s.active) : "") << '\n';
  os << "attained," << (s.attained ? 1 : 0) << '\n';
  os << "rho_arbitrary," << (s.rho_arbitrary ? 1 : 0) << '\n';
  os << "p_vacuous," << (s.p_vacuous ? 1 : 0) << '\n';
  os << "x_hat," << csv::num(s.x_hat) << '\n';
  os << "mean_Y," << csv::num(ev.mean()) << '\n';
  os << "var_Y," << csv::num(ev.variance()) << '\n';
  os << "P_lower," << csv::num(ev.P_lower(s.q)) << '\n';
  os << "P_upper," << csv::num(ev.P_upper(s.q)) << '\n';
}

int cmd_solve(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  require_control_keys(cfg);
  cfg.require({"Kbar"});
  const ControlProblem problem = problem_from_config(cfg, cfg.number("Kbar"));
  const ControlEvaluator ev(problem.model, problem.lift);
  const ControlSolution s = solve(problem, ev);
  {
    auto os = open_output(opt, "solution.csv");
    write_solution_csv(os, s, ev);
  }
  Summary out(opt.quiet);
  out << "case: " << to_string(s.case_label) << (s.attained ? "" : " (infimum, no minimizer)")
      << "\n";
  out << "q = " << fmt("%.6g", s.q) << ", hbar = " << fmt("%.6g", s.hbar)
      << ", rho = " << fmt("%.6g", s.rho) << (s.rho_arbitrary ? " (any rho > 0)" : "")
      << ", u = " << fmt("%.6g", s.u) << "\n";
  out << "J = " << fmt("%.6g", s.J) << ", K = " << fmt("%.6g", s.K);
  if (s.P) out << ", P = " << fmt("%.6g", *s.P) << ", active: " << to_string(s.active);
  out << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

std::vector<double> kbar_grid(const RunConfig& cfg) {
  cfg.require({"Kbar_min", "Kbar_max", "Kbar_step"});
  const double lo = cfg.number("Kbar_min");
  const double hi = cfg.number("Kbar_max");
  const double step = cfg.number("Kbar_step");
  if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0))
    throw InvalidArgument("keys 'Kbar_min', 'Kbar_max', 'Kbar_step': need 0 < min <= max, step > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  if (count > 10'000'000) throw InvalidArgument("key 'Kbar_step': grid too large");
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = lo + static_cast<double>(k) * step;
  return grid;
}

int cmd_sweep(const CommonOptions& opt, const std::string& sites_dir) {
  const RunConfig cfg = load_config(opt);
  const std::vector<double> grid = kbar_grid(cfg);
  Summary out(opt.quiet);

  if (sites_dir.empty()) {
    require_control_keys(cfg);
    const ControlProblem problem = problem_from_config(cfg, grid.front());
    const auto rows = sweep(problem, grid);
    auto os = open_output(opt, "sweep.csv");
    write_sweep_csv(os, rows, problem.pbar.has_value());
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.solution ? 0 : 1;
    out << "sweep: " << rows.size() << " rows, " << failed << " failed\n";
    return 0;
  }

  // Multi-site mode: every *.cfg file in the directory is a site.
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(sites_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cfg") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidArgument("no .cfg site files in '" + sites_dir + "'");

  struct Site {
    std::string name;
    std::vector<SweepRow> rows;
    std::string error;
  };
  std::vector<RunConfig> site_cfgs;
  for (const auto& f : files) {
    RunConfig sc = RunConfig::load(f.string());
    if (opt.m) sc.set("m", std::to_string(*opt.m));
    require_control_keys(sc);
    site_cfgs.push_back(std::move(sc));
  }
  std::vector<Site> sites;
  for (std::size_t s = 0; s < files.size(); ++s) {
    Site site;
    site.name = files[s].stem().string();
    try {
      const ControlProblem problem = problem_from_config(site_cfgs[s], grid.front());
      site.rows = sweep(problem, grid);
      auto os = open_output(opt, "sweep_" + site.name + ".csv");
      write_sweep_csv(os, site.rows, problem.pbar.has_value());
    } catch (const Error& e) {
      site.error = e.what();
      out << "site " << site.name << ": " << site.error << "\n";
    }
    sites.push_back(std::move(site));
  }

  auto os = open_output(opt, "sites.csv");
  os << "Kbar,argmin_site,min_J,argmax_site,max_J\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Site* best = nullptr;
    const Site* worst = nullptr;
    double best_j = std::numeric_limits<double>::infinity();
    double worst_j = -std::numeric_limits<double>::infinity();
    for (const auto& site : sites) {
      if (!site.error.empty() || !site.rows[k].solution) continue;
      const double j = site.rows[k].solution->J;
      if (j < best_j) {
        best_j = j;
        best = &site;
      }
      if (j > worst_j) {
        worst_j = j;
        worst = &site;
      }
    }
    os << csv::num(grid[k]) << ',';
    if (best)
      os << best->name << ',' << csv::num(best_j) << ',' << worst->name << ',' << csv::num(worst_j);
    else
      os << ",,,";
    os << '\n';
  }
  out << "multi-site sweep: " << sites.size() << " sites, " << grid.size() << " Kbar values\n";
  return 0;
}

// ---------------------------------------------------------------- simulate

struct ControlledSetup {
  ControlSolution solution;
  Controller controller;
};

// Optimal controller for the truncated model the simulation converges to.
ControlledSetup optimal_controller(const RunConfig& cfg, const SupCbiModel& truncated,
                                   const MarkovianLift& lift) {
  const ControlProblem problem{truncated, lift, target_from_config(cfg), cfg.number("Kbar"),
                               cfg.optional_number("Pbar")};
  const ControlSolution s = solve(problem);
  if (!s.attained)
    throw Infeasible("no optimal controller exists for q > 1; nothing to simulate");
  return {s, Controller{s.rho, s.u, s.x_hat}};
}

int cmd_simulate(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  require_model_keys(cfg);
  cfg.require({"horizon", "dt", "eps"});
  const bool controlled = cfg.boolean_or("controlled", false);
  if (controlled) {
    cfg.require_one_of("Qhat", "Qabs");
    cfg.require({"Kbar"});
  }
  const SupCbiModel model = model_from_config(cfg);
  const MarkovianLift lift = build_lift(model.pi(), lift_level(cfg));
  SimulationOptions so;
  so.horizon = cfg.number("horizon");
  so.dt = cfg.number("dt");
  so.eps = cfg.number("eps");
  so.seed = seed_of(cfg);
  so.max_expected_jumps = cfg.number_or("max_expected_jumps", so.max_expected_jumps);
  const SupCbiModel truncated = model.truncated(so.eps);
  std::optional<ControlledSetup> setup;
  if (controlled) {
    setup = optimal_controller(cfg, truncated, lift);
    so.controller = setup->controller;
  }

  const SimulatedPath path = simulate(model, lift, so);
  {
    auto os = open_output(opt, "path.csv");
    write_path_csv(os, path);
  }

  const ControlEvaluator ev(truncated, lift);
  const auto stats = path_stats(path.y_total);
  const std::size_t batches = std::min<std::size_t>(50, path.steps() / 2);
  const TimeAverage mean_y = batch_mean(path.y_total, batches);
  const double bias = model.nu().small_jump_moment(1, so.eps);

  auto os = open_output(opt, "stats.csv");
  os << "quantity,estimate,std_error,closed_form\n";
  os << "mean_Y," << csv::num(mean_y.mean) << ',' << csv::num(mean_y.std_error) << ','
     << csv::num(ev.mean()) << '\n';
  os << "var_Y," << csv::num(stats.variance) << ",," << csv::num(ev.variance()) << '\n';
  os << "skewness_Y," << csv::num(stats.skewness) << ",,\n";
  os << "kurtosis_Y," << csv::num(stats.kurtosis) << ",,\n";
  Summary out(opt.quiet);
  out << "simulated " << path.steps() << " steps, " << path.jumps << " jumps (eps = "
      << fmt("%g", so.eps) << ", burn-in " << fmt("%g", path.burn_in) << ")\n";
  out << "mean Y: " << fmt("%.6g", mean_y.mean) << " +- " << fmt("%.2g", mean_y.std_error)
      << " (closed form with truncated moments " << fmt("%.6g", ev.mean()) << ")\n";
  out << "discharge mean: " << fmt("%.6g", model.baseflow() + mean_y.mean) << "\n";
  if (setup) {
    const auto avg = controlled_averages(path, batches);
    const double q = setup->solution.q;
    const double h = setup->controller.h();
    os << "J," << csv::num(avg.deviation.mean) << ',' << csv::num(avg.deviation.std_error) << ','
       << csv::num(ev.J(q, h)) << '\n';
    os << "K," << csv::num(avg.cost.mean) << ',' << csv::num(avg.cost.std_error) << ','
       << csv::num(ev.K(q, h)) << '\n';
    os << "P," << csv::num(avg.modification.mean) << ',' << csv::num(avg.modification.std_error)
       << ',' << csv::num(ev.P(q, h)) << '\n';
    double x_sum = 0.0;
    for (const double x : path.x) x_sum += x;
    const double q_mean = x_sum / static_cast<double>(path.steps()) + q * model.baseflow();
    os << "mean_Q," << csv::num(q_mean) << ",," << csv::num(q * (model.baseflow() + ev.mean()))
       << '\n';
    out << "controlled: rho = " << fmt("%.6g", setup->controller.rho)
        << ", u = " << fmt("%.6g", setup->controller.u) << "\n";
    out << "J: " << fmt("%.6g", avg.deviation.mean) << " +- "
        << fmt("%.2g", avg.deviation.std_error) << " vs " << fmt("%.6g", ev.J(q, h)) << "\n";
    out << "K: " << fmt("%.6g", avg.cost.mean) << " +- " << fmt("%.2g", avg.cost.std_error)
        << " vs " << fmt("%.6g", ev.K(q, h)) << "\n";
    out << "mean controlled discharge: " << fmt("%.6g", q_mean) << "\n";
  }
  os << "truncation_bias_M1," << csv::num(bias) << ",," << csv::num(bias / model.M1()) << '\n';
  return 0;
}

// ---------------------------------------------------------------- identify

int cmd_identify(const CommonOptions& opt) {
  const RunConfig cfg = load_config(opt);
  cfg.require({"series"});
  IdentifyOptions io;
  io.D = cfg.number_or("D", 0.5);
  if (cfg.has("max_lag")) io.max_lag = static_cast<std::size_t>(cfg.unsigned_integer("max_lag"));
  const std::string mode = cfg.has("identify_mode") ? cfg.text("identify_mode") : "analytic";
  if (mode != "analytic" && mode != "full")
    throw InvalidArgument("key 'identify_mode': must be 'analytic' or 'full'");
  io.moments.analytic = mode == "analytic";
  io.moments.restarts = static_cast<int>(cfg.integer_or("restarts", 20));
  io.moments.lift_level = lift_level(cfg);
  io.moments.seed = seed_of(cfg);
  io.moments.mc.replicates = static_cast<int>(cfg.integer_or("mc_replicates", 64));
  io.moments.mc.horizon = cfg.number_or("mc_horizon", io.moments.mc.horizon);
  io.moments.mc.eps = cfg.number_or("mc_eps", io.moments.mc.eps);
  io.moments.mc.lift_level = static_cast<int>(cfg.integer_or("mc_m", io.moments.mc.lift_level));
  io.moments.mc.seed = derive_seed(seed_of(cfg), 0x6d63);

  // A relative series path is taken relative to the configuration file.
  fs::path series_path(cfg.text("series"));
  if (series_path.is_relative()) series_path = fs::path(opt.config).parent_path() / series_path;
  std::ifstream in(series_path);
  if (!in) throw InvalidArgument("key 'series': cannot open '" + series_path.string() + "'");
  const DischargeSeries series = read_series_csv(in);
  const Identification id = identify(series, io);
  {
    auto os = open_output(opt, "fit_parameters.csv");
    write_parameters_csv(os, id);
  }
  {
    auto os = open_output(opt, "fit_statistics.csv");
    write_statistics_csv(os, id.report);
  }
  std::ostringstream text;
  write_report_text(text, id);
  {
    auto os = open_output(opt, "fit_report.txt");
    os << text.str();
  }
  Summary out(opt.quiet);
  out << text.str();
  return 0;
}

// ---------------------------------------------------------------- verify

struct Check {
  std::string name;
  double value;
  std::optional<double> threshold;  // empty for reported quantities
  bool pass;
};

// Smallest eps whose dropped share of M1 is at most `share`, found on a log scale.
double eps_for_bias(const TemperedStableLevy& nu, double share) {
  double lo = 1e-300;
  double hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (nu.small_jump_moment(1, mid) / nu.moment(1) <= share)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

int cmd_verify(const CommonOptions& opt, bool corrupt) {
  const RunConfig cfg = load_config(opt);
  require_model_keys(cfg);
  const SupCbiModel model = model_from_config(cfg);
  const auto states_per_draw = static_cast<int>(cfg.integer_or("verify_states", 100));
  const auto draws = static_cast<int>(cfg.integer_or("verify_draws", 20));
  const double horizon = cfg.number_or("verify_horizon", 2e5);
  const int mc_level = static_cast<int>(cfg.integer_or("mc_m", 2));
  if (states_per_draw < 1 || draws < 1) throw InvalidArgument("verify_states and verify_draws must be >= 1");
  std::optional<double> eps_cfg = cfg.optional_number("verify_eps");
  const std::uint64_t seed = seed_of(cfg);
  Rng rng(derive_seed(seed, 0x766572));

  std::vector<Check> checks;

  // Operating point shared by the negative control and the Monte Carlo check.
  const MarkovianLift mc_lift = build_lift(model.pi(), mc_level);
  const double budget = cfg.number_or("max_expected_jumps", 5e7);
  double eps = eps_cfg.value_or(eps_for_bias(model.nu(), 1e-3));
  if (!eps_cfg) {
    const double burn_guess = 10.0 / mc_lift.rate(0);
    while (expected_jump_count(model, eps, horizon + 2.0 * burn_guess) > 0.5 * budget) eps *= 1.5;
  }
  const SupCbiModel truncated = model.truncated(eps);
  const ControlEvaluator ev(truncated, mc_lift);
  double q = 0.5;
  if (cfg.has("Qhat") || cfg.has("Qabs")) q = q_from_target(truncated, mc_lift, target_from_config(cfg));
  if (!(q < 1.0)) throw InvalidArgument("verify: the controlled check needs q < 1");
  const double h = cfg.has("Kbar") ? solve_hbar(ev, q, cfg.number("Kbar")) : mc_lift.rate(0);

  const auto lift_of_size = [&](std::size_t n) {
    return n == 1 ? MarkovianLift({model.pi().quantile(0.5)}, {1.0})
                  : build_lift(model.pi(), static_cast<int>(std::log2(static_cast<double>(n))));
  };

  // Backward Kolmogorov residuals of the closed-form potentials at random
  // control points, on a wide box of states plus the stationary-scale probes.
  const double scale = stationary_mean(model, lift_of_size(2));
  for (const std::size_t n : {1, 2, 4}) {
    const MarkovianLift lift = lift_of_size(n);
    double worst_j = 0.0;
    double worst_k = 0.0;
    for (int d = 0; d < draws; ++d) {
      const double qd = std::exp(std::log(0.1) + std::log(30.0) * uniform_open(rng));
      const double hd = lift.rate(0) * std::exp(std::log(1e-2) + std::log(1e4) * uniform_open(rng));
      const ControlPoint cp{qd, hd, qd * stationary_mean(model, lift)};
      auto states = probe_states(model, lift, cp, states_per_draw, rng);
      for (int s = 0; s < states_per_draw; ++s) {
        std::vector<double> st(n + 1);
        st[0] = scale * (20.0 * uniform_open(rng) - 10.0);
        for (std::size_t i = 1; i <= n; ++i) st[i] = scale * 10.0 * uniform_open(rng);
        states.push_back(std::move(st));
      }
      QuadraticPotential phi = variance_potential(model, lift, cp);
      if (corrupt) phi = perturbed(phi, {CoefficientRef::Kind::a, 0, 0}, 1.01);
      worst_j = std::max(worst_j,
                         bke_residual(model, lift, cp, phi, RunningCost::variance, states).max_rel);
      worst_k = std::max(worst_k, bke_residual_K(model, lift, cp, states).max_rel);
    }
    checks.push_back({"bke_variance_n" + std::to_string(n), worst_j, 1e-8, worst_j <= 1e-8});
    checks.push_back({"bke_cost_n" + std::to_string(n), worst_k, 1e-8, worst_k <= 1e-8});
  }

  // Negative control at the operating point: every 1% coefficient
  // perturbation of either potential must be visible in the residual.
  for (const std::size_t n : {1, 2, 4}) {
    const MarkovianLift lift = lift_of_size(n);
    const ControlPoint cp{q, h, q * stationary_mean(model, lift)};
    const auto states = probe_states(model, lift, cp, states_per_draw, rng);
    double weakest = std::numeric_limits<double>::infinity();
    for (const auto kind : {RunningCost::variance, RunningCost::control_cost}) {
      const QuadraticPotential phi = kind == RunningCost::variance
                                         ? variance_potential(model, lift, cp)
                                         : cost_potential(model, lift, cp);
      for (const auto& ref : coefficient_refs(phi))
        weakest = std::min(
            weakest, bke_residual(model, lift, cp, perturbed(phi, ref, 1.01), kind, states).max_rel);
    }
    checks.push_back({"negative_control_n" + std::to_string(n), weakest, 1e-4, weakest > 1e-4});
  }

  // Lift convergence: R_n increases towards R.
  {
    const auto rows = convergence_report(model.pi(), 6, 13);
    bool monotone = true;
    for (std::size_t k = 1; k < rows.size(); ++k) monotone = monotone && rows[k].r_n > rows[k - 1].r_n;
    checks.push_back({"lift_monotone_n64_to_n8192", monotone ? 1.0 : 0.0, 1.0, monotone});
    checks.push_back({"lift_rel_error_n8192", rows.back().rel_error, std::nullopt, true});
    checks.push_back({"lift_rate_n8192", rows.back().rate, std::nullopt, true});
  }

  // Controlled Monte Carlo against the closed forms with truncated moments.
  {
    SimulationOptions so;
    so.horizon = horizon;
    so.dt = 0.5 / std::max(mc_lift.rate(mc_lift.size() - 1), h);
    so.eps = eps;
    so.seed = derive_seed(seed, 0x6d63);
    so.max_expected_jumps = budget;
    so.controller = Controller{q * h, -(1.0 - q) * h, q * ev.mean()};
    const SimulatedPath path = simulate(model, mc_lift, so);
    const auto avg = controlled_averages(path, 50);
    auto z = [](const TimeAverage& t, double exact) { return std::abs(t.mean - exact) / t.std_error; };
    const double z_mean = z(avg.y, ev.mean());
    const double z_j = z(avg.deviation, ev.J(q, h));
    const double z_k = z(avg.cost, ev.K(q, h));
    const double z_p = z(avg.modification, ev.P(q, h));
    checks.push_back({"mc_mean_Y_zscore", z_mean, 3.0, z_mean <= 3.0});
    checks.push_back({"mc_J_zscore", z_j, 3.0, z_j <= 3.0});
    checks.push_back({"mc_K_zscore", z_k, 3.0, z_k <= 3.0});
    checks.push_back({"mc_P_zscore", z_p, 3.0, z_p <= 3.0});
    const double bias = model.nu().small_jump_moment(1, eps);
    checks.push_back({"truncation_eps", eps, std::nullopt, true});
    checks.push_back({"truncation_bias_M1", bias, std::nullopt, true});
    checks.push_back({"truncation_bias_M1_relative", bias / model.M1(), std::nullopt, true});
  }

  bool all = true;
  {
    auto os = open_output(opt, "verify.csv");
    os << "check,value,threshold,pass\n";
    for (const auto& c : checks) {
      os << c.name << ',' << csv::num(c.value) << ',' << (c.threshold ? csv::num(*c.threshold) : "") << ','
         << (c.pass ? 1 : 0) << '\n';
      all = all && c.pass;
    }
  }
  Summary out(opt.quiet);
  for (const auto& c : checks) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-32s %14.6g  %s\n", c.name.c_str(), c.value,
                  c.pass ? "ok" : "FAILED");
    out << buf;
  }
  if (!all) {
    std::cerr << "verify: at least one check failed\n";
    return static_cast<int>(ExitCode::numerical_failure);
  }
  return 0;
}

void add_common(CLI::App* sub, CommonOptions& opt) {
  sub->add_option("--config", opt.config, "key = value configuration file")->required();
  sub->add_option("--out", opt.out, "output directory");
  sub->add_option("--seed", opt.seed, "random seed (overrides the config)");
  sub->add_option("--m", opt.m, "lift level, n = 2^m (overrides the config)");
  sub->add_flag("--quiet", opt.quiet, "suppress the stdout summary");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supCBI discharge model: lift, control, simulation, identification"};
  app.require_subcommand(1);
  CommonOptions opt;
  std::string sites;
  bool corrupt = false;

  auto* lift = app.add_subcommand("lift", "quantile lift and convergence report");
  auto* solve_cmd = app.add_subcommand("solve", "optimal controller for one cost bound");
  auto* sweep_cmd = app.add_subcommand("sweep", "optimal controllers over a Kbar grid");
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo path of the lifted system");
  auto* identify_cmd = app.add_subcommand("identify", "fit the model to a discharge series");
  auto* verify = app.add_subcommand("verify", "residual, convergence and Monte Carlo checks");
  for (auto* sub : {lift, solve_cmd, sweep_cmd, simulate_cmd, identify_cmd, verify}) add_common(sub, opt);
  sweep_cmd->add_option("--sites", sites, "directory of per-site .cfg files");
  verify->add_flag("--corrupt-coefficient", corrupt,
                   "perturb one potential coefficient by 1% to exercise failure reporting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::config_error);
  }

  try {
    if (lift->parsed()) return cmd_lift(opt);
    if (solve_cmd->parsed()) return cmd_solve(opt);
    if (sweep_cmd->parsed()) return cmd_sweep(opt, sites);
    if (simulate_cmd->parsed()) return cmd_simulate(opt);
    if (identify_cmd->parsed()) return cmd_identify(opt);
    if (verify->parsed()) return cmd_verify(opt, corrupt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::numerical_failure);
  }
  return static_cast<int>(ExitCode::config_error);
}
