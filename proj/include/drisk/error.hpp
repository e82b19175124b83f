#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drisk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (files, schemas, configs).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A symmetric matrix that should be positive definite was not.
class NumericalDegeneracy : public Error {
 public:
  NumericalDegeneracy(const std::string& what, std::size_t pivot)
      : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// An iterative method ran out of budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace drisk
