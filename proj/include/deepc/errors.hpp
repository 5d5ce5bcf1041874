#pragma once

#include <stdexcept>
#include <string>

namespace deepc {

/// Bad user input: invalid parameters, zero-variance channels, malformed config.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shape mismatch between series, matrices or horizons.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Identification data that cannot support a controller, e.g. not persistently exciting.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or decomposition could not be carried out.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A controller could not produce a plan. Carries a text dump of the last QP.
class ControllerError : public std::runtime_error {
 public:
  ControllerError(const std::string& what, std::string problem_dump = {})
      : std::runtime_error(what), problem_dump_(std::move(problem_dump)) {}

  const std::string& problem_dump() const noexcept { return problem_dump_; }

 private:
  std::string problem_dump_;
};

}  // namespace deepc
