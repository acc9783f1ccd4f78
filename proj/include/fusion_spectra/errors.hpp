#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fusion_spectra {

// Invalid experiment description (dimensions, ratios, list lengths, regime/policy mismatch).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad data handed to an operation (NaN/Inf, degenerate point clouds, missing parts).
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Out-of-range scalar argument (bandwidth, quantile index, ...).
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Requested analysis is outside the expansion regime it is defined for.
class RegimeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Dense linear algebra failure. Carries whatever was computed before the failure.
class NumericalError : public std::runtime_error {
public:
  NumericalError(const std::string& what, std::vector<double> partial_singular = {})
      : std::runtime_error(what), partial_singular_(std::move(partial_singular)) {}

  const std::vector<double>& partial_singular() const noexcept { return partial_singular_; }

private:
  std::vector<double> partial_singular_;
};

// Subordination solver gave up on too many grid points.
class SolverError : public NumericalError {
public:
  SolverError(const std::string& what, double failed_fraction, double max_residual)
      : NumericalError(what), failed_fraction_(failed_fraction), max_residual_(max_residual) {}

  double failed_fraction() const noexcept { return failed_fraction_; }
  double max_residual() const noexcept { return max_residual_; }

private:
  double failed_fraction_;
  double max_residual_;
};

}  // namespace fusion_spectra
