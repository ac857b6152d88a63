#pragma once

// Quantile-based Markovian lift of the mixing measure.
//
// With n = 2^m nodes, node i sits at the odd quantile of level (2i - 1) / (2n)
// and carries weight 1/n, i.e. the probability of the cell between the
// neighbouring even quantiles. The domain is not truncated.

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "supcbi/csv.hpp"
#include "supcbi/error.hpp"
#include "supcbi/measures.hpp"

namespace supcbi {

class MarkovianLift {
 public:
  /// Lift with explicit nodes; `m` is 0 when the nodes are not a quantile lift.
  MarkovianLift(std::vector<double> rates, std::vector<double> weights, int m = 0)
      : m_(m), r_(std::move(rates)), c_(std::move(weights)) {
    if (r_.empty() || r_.size() != c_.size())
      throw InvalidArgument("lift: rates and weights must be non-empty and of equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < r_.size(); ++i) {
      if (!std::isfinite(r_[i]) || !(r_[i] > 0.0))
        throw InvalidArgument("lift: rates must be finite and positive");
      if (i > 0 && !(r_[i] > r_[i - 1]))
        throw InvalidArgument("lift: rates must be strictly increasing");
      if (!std::isfinite(c_[i]) || !(c_[i] > 0.0))
        throw InvalidArgument("lift: weights must be positive");
      total += c_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("lift: weights must sum to 1");
  }

  int m() const noexcept { return m_; }
  std::size_t size() const noexcept { return r_.size(); }
  std::span<const double> rates() const noexcept { return r_; }
  std::span<const double> weights() const noexcept { return c_; }
  double rate(std::size_t i) const { return r_.at(i); }
  double weight(std::size_t i) const { return c_.at(i); }

  /// sum_i c_i f(r_i): the lift used as a quadrature rule for pi.
  template <typename F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < r_.size(); ++i) sum += c_[i] * f(r_[i]);
    return sum;
  }

  /// R_n = sum_i c_i / r_i.
  double inv_mean() const {
    return integrate([](double r) { return 1.0 / r; });
  }

 private:
  int m_;
  std::vector<double> r_;
  std::vector<double> c_;
};

inline constexpr int kDefaultLiftLevel = 13;
inline constexpr int kMaxLiftLevel = 16;

/// Quantile lift with n = 2^m nodes.
inline MarkovianLift build_lift(const GammaMixingMeasure& pi, int m) {
  if (m < 1 || m > kMaxLiftLevel)
    throw InvalidArgument("lift: m must lie in [1, " + std::to_string(kMaxLiftLevel) + "]");
  const std::size_t n = std::size_t{1} << m;
  std::vector<double> r(n);
  std::vector<double> c(n, 1.0 / static_cast<double>(n));
  const double two_n = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = pi.quantile((2.0 * i + 1.0) / two_n);
  return MarkovianLift(std::move(r), std::move(c), m);
}

inline double lift_inv_mean(const MarkovianLift& lift) { return lift.inv_mean(); }

struct ConvergenceRow {
  std::size_t n = 0;
  double r_n = 0.0;       // sum c_i / r_i
  double r_exact = 0.0;   // int r^{-1} pi(dr)
  double rel_error = 0.0; // (R - R_n) / R
  double rate = std::numeric_limits<double>::quiet_NaN();  // log2(e_{n/2} / e_n)
};

/// Convergence of R_n towards R for m = m_min..m_max.
inline std::vector<ConvergenceRow> convergence_report(const GammaMixingMeasure& pi,
                                                      int m_min, int m_max) {
  if (m_min < 1 || m_max < m_min || m_max > kMaxLiftLevel)
    throw InvalidArgument("convergence report: need 1 <= m_min <= m_max <= 16");
  std::vector<ConvergenceRow> rows;
  const double exact = pi.inv_mean();
  for (int m = m_min; m <= m_max; ++m) {
    ConvergenceRow row;
    row.n = std::size_t{1} << m;
    row.r_n = build_lift(pi, m).inv_mean();
    row.r_exact = exact;
    row.rel_error = (exact - row.r_n) / exact;
    if (!rows.empty()) row.rate = std::log2(rows.back().rel_error / row.rel_error);
    rows.push_back(row);
  }
  return rows;
}

/// CSV with header `i,r_i,c_i`, 1-based index, 17 significant digits.
inline void write_lift_csv(std::ostream& os, const MarkovianLift& lift) {
  os << "i,r_i,c_i\n";
  for (std::size_t i = 0; i < lift.size(); ++i)
    os << (i + 1) << ',' << csv::num(lift.rate(i)) << ',' << csv::num(lift.weight(i)) << '\n';
}

inline void write_convergence_csv(std::ostream& os, std::span<const ConvergenceRow> rows) {
  os << "n,R_n,R,e_n,rate\n";
  for (const auto& row : rows) {
    os << row.n << ',' << csv::num(row.r_n) << ',' << csv::num(row.r_exact) << ','
       << csv::num(row.rel_error) << ',';
    if (!std::isnan(row.rate)) os << csv::num(row.rate);
    os << '\n';
  }
}

}  // namespace supcbi
