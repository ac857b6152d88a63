#pragma once

// Flat `key = value` run configuration with strict key checking.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "supcbi/control.hpp"
#include "supcbi/csv.hpp"
#include "supcbi/error.hpp"
#include "supcbi/measures.hpp"
#include "supcbi/model.hpp"

namespace supcbi {

inline constexpr std::array<std::string_view, 37> kConfigKeys = {
    // model
    "A", "B", "c1", "c2", "alpha", "beta", "Dbeta", "D", "baseflow",
    // lift
    "m", "m_min", "m_max",
    // control
    "Qhat", "Qabs", "Kbar", "Pbar", "Kbar_min", "Kbar_max", "Kbar_step",
    // simulation
    "horizon", "dt", "eps", "seed", "controlled", "max_expected_jumps",
    // identification
    "series", "identify_mode", "restarts", "max_lag", "mc_replicates", "mc_horizon", "mc_eps",
    "mc_m",
    // verification
    "verify_states", "verify_draws", "verify_horizon", "verify_eps"};

class RunConfig {
 public:
  RunConfig() = default;

  /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
  static RunConfig parse(std::istream& in, const std::string& source = "config") {
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto body = csv::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      const std::string where = source + ":" + std::to_string(line_no);
      if (eq == std::string_view::npos)
        throw InvalidArgument(where + ": expected `key = value`");
      const std::string key(csv::trim(body.substr(0, eq)));
      const std::string value(csv::trim(body.substr(eq + 1)));
      if (!is_known(key)) throw InvalidArgument(where + ": unknown key '" + key + "'");
      if (value.empty()) throw InvalidArgument(where + ": key '" + key + "' has no value");
      if (!cfg.values_.emplace(key, value).second)
        throw InvalidArgument(where + ": key '" + key + "' given twice");
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  static bool is_known(std::string_view key) {
    return std::find(kConfigKeys.begin(), kConfigKeys.end(), key) != kConfigKeys.end();
  }

  bool has(std::string_view key) const { return values_.count(std::string(key)) != 0; }

  void set(const std::string& key, const std::string& value) {
    if (!is_known(key)) throw InvalidArgument("unknown key '" + key + "'");
    values_[key] = value;
  }

  /// Throws naming the first missing key.
  void require(std::initializer_list<std::string_view> keys) const {
    for (const auto key : keys)
      if (!has(key)) throw InvalidArgument("missing required key '" + std::string(key) + "'");
  }

  /// Throws unless exactly one of the two keys is present.
  void require_one_of(std::string_view a, std::string_view b) const {
    if (has(a) == has(b))
      throw InvalidArgument("exactly one of '" + std::string(a) + "' and '" + std::string(b) +
                            "' must be given");
  }

  const std::string& text(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) throw InvalidArgument("missing required key '" + std::string(key) + "'");
    return it->second;
  }

  double number(std::string_view key) const {
    const std::string& v = text(key);
    std::size_t pos = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || !std::isfinite(out))
      throw InvalidArgument("key '" + std::string(key) + "': '" + v + "' is not a finite number");
    return out;
  }

  double number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::optional<double> optional_number(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  long long integer(std::string_view key) const {
    const std::string& v = text(key);
    std::size_t pos = 0;
    long long out = 0;
    try {
      out = std::stoll(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size()) throw InvalidArgument("key '" + std::string(key) + "': '" + v + "' is not an integer");
    return out;
  }

  long long integer_or(std::string_view key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(std::string_view key) const {
    const std::string& v = text(key);
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
      if (!v.empty() && v[0] != '-') out = std::stoull(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty())
      throw InvalidArgument("key '" + std::string(key) + "': '" + v + "' is not an unsigned integer");
    return out;
  }

  bool boolean_or(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = text(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("key '" + std::string(key) + "': '" + v + "' is not a boolean");
  }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Checks the model keys without building anything.
inline void require_model_keys(const RunConfig& cfg) {
  cfg.require({"A", "B", "c1", "c2", "alpha", "baseflow"});
  cfg.require_one_of("beta", "Dbeta");
}

/// Mixing measure alone: alpha with beta, or Dbeta with D (or with B, c1, c2).
inline GammaMixingMeasure mixing_from_config(const RunConfig& cfg) {
  cfg.require({"alpha"});
  cfg.require_one_of("beta", "Dbeta");
  if (cfg.has("beta")) return GammaMixingMeasure(cfg.number("alpha"), cfg.number("beta"));
  double d = 0.0;
  if (cfg.has("D")) {
    d = cfg.number("D");
  } else {
    cfg.require({"B", "c1", "c2"});
    d = 1.0 - cfg.number("B") * TemperedStableLevy(cfg.number("c1"), cfg.number("c2")).moment(1);
  }
  if (!(d > 0.0 && d <= 1.0)) throw InvalidArgument("key 'D': must lie in (0, 1]");
  return GammaMixingMeasure(cfg.number("alpha"), cfg.number("Dbeta") / d);
}

/// Model from A, B, c1, c2, alpha, beta or Dbeta, and baseflow. Dbeta is
/// divided by the configured D when given, else by 1 - B M1.
inline SupCbiModel model_from_config(const RunConfig& cfg) {
  require_model_keys(cfg);
  const TemperedStableLevy nu(cfg.number("c1"), cfg.number("c2"));
  return SupCbiModel(cfg.number("A"), cfg.number("B"), mixing_from_config(cfg), nu,
                     cfg.number("baseflow"));
}

inline int lift_level(const RunConfig& cfg) {
  const long long m = cfg.integer_or("m", kDefaultLiftLevel);
  if (m < 1 || m > kMaxLiftLevel) throw InvalidArgument("key 'm': must lie in [1, 16]");
  return static_cast<int>(m);
}

inline Target target_from_config(const RunConfig& cfg) {
  cfg.require_one_of("Qhat", "Qabs");
  return cfg.has("Qhat") ? Target::discharge(cfg.number("Qhat"))
                         : Target::abstraction(cfg.number("Qabs"));
}

}  // namespace supcbi
