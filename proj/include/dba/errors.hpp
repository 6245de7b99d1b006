#pragma once

#include <stdexcept>
#include <string>

namespace dba {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Raised by PCG when a search direction has non-positive curvature.
class Breakdown : public Error {
 public:
  using Error::Error;
};

class StrategyPrecondition : public Error {
 public:
  using Error::Error;
};

class UnsupportedObjective : public Error {
 public:
  using Error::Error;
};

class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

class SubproblemFailure : public Error {
 public:
  SubproblemFailure(std::size_t scenario, const std::string& what)
      : Error("scenario " + std::to_string(scenario) + ": " + what), scenario_(scenario) {}
  std::size_t scenario() const { return scenario_; }

 private:
  std::size_t scenario_;
};

/// Out-of-range solver parameters (e.g. a step length outside its interval).
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace dba
