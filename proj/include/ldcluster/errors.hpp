#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ldcluster {

/// Base for every error raised by the library. `module()` names the
/// component that raised it so the CLI can report where a run failed.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class AccuracyError : public Error {
 public:
  AccuracyError(std::string module, const std::string& what, double achieved)
      : Error(std::move(module), what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Raised when a moment-matching problem has no solution in the supported
/// family. Carries the best moment vector that was reached (index i holds
/// E Z^{i+1}).
class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string module, const std::string& what, std::vector<double> achieved)
      : Error(std::move(module), what), achieved_(std::move(achieved)) {}
  const std::vector<double>& achieved_moments() const noexcept { return achieved_; }

 private:
  std::vector<double> achieved_;
};

class ExhaustionError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class NonTerminationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ldcluster
