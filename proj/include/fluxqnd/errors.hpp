#pragma once

#include <stdexcept>
#include <string>

namespace fluxqnd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller supplied a value outside the documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Phase grid too coarse or too narrow for the state being projected.
class GridError : public Error {
 public:
  using Error::Error;
};

/// Potential curvature at the expansion point is not positive.
class CurvatureError : public Error {
 public:
  using Error::Error;
};

/// Propagation lost unitarity beyond the configured tolerance.
class NormDriftError : public Error {
 public:
  using Error::Error;
};

/// Two runs that must share a schedule do not.
class ScheduleMismatch : public Error {
 public:
  using Error::Error;
};

/// A branch-conditional distribution carries (almost) no probability.
class EmptyBranchError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed validation; the message names the field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace fluxqnd
