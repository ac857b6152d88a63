#pragma once

#include <stdexcept>
#include <string>

namespace supcbi {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  infeasible = 3,
  numerical_failure = 4,
};

/// Base class for all library errors; carries the exit code the CLI maps it to.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid parameter, bad configuration key or malformed input file.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(what, ExitCode::config_error) {}
};

/// The requested control problem has no admissible solution.
class Infeasible : public Error {
 public:
  explicit Infeasible(const std::string& what)
      : Error(what, ExitCode::infeasible) {}
};

/// An iterative method failed to converge or produced a non-finite value.
class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what)
      : Error(what, ExitCode::numerical_failure) {}
};

}  // namespace supcbi
