#pragma once

#include <stdexcept>
#include <string>

namespace qmetro {

/// Invalid argument to a library operation (bad N, k, axis, dimension mismatch, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter combination the toolkit deliberately does not model (e.g. odd N).
class UnsupportedParameterError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// A value that contradicts a physical bound it must satisfy.
class InconsistencyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a density matrix fails Hermiticity/trace/positivity checks.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the likelihood or posterior vanishes everywhere on the interval.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double residual_rms, int iterations)
      : std::runtime_error(what), residual_rms_(residual_rms), iterations_(iterations) {}

  double residual_rms() const noexcept { return residual_rms_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_rms_;
  int iterations_;
};

/// Malformed configuration or command-line input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qmetro
