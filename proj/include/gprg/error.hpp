#pragma once

#include <stdexcept>
#include <string>

namespace gprg {

/// Invalid user-supplied configuration (grid sizes, parameters, config files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Programming errors such as combining fields that live on different grids.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical failure inside an iterative method.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A preconditioner (or the metric it induces) lost positive definiteness.
class NotCoerciveError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// An iteration ran out of budget before reaching its tolerance.
class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, int iterations, double achieved)
      : SolverError(what), iterations_(iterations), achieved_(achieved) {}
  int iterations() const noexcept { return iterations_; }
  double achieved() const noexcept { return achieved_; }

 private:
  int iterations_;
  double achieved_;
};

}  // namespace gprg
