#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace divlab {

// Violated precondition or malformed input. CLI exit code 2.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dimension mismatch between a network and its inputs or parameters.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A certificate whose norm preconditions do not hold. Distinct from a
// certificate that was checked and found false.
class CertificateInvalid : public ContractError {
 public:
  using ContractError::ContractError;
};

// A lower-bound construction that cannot be built for the given inputs.
class ConstructionInfeasible : public ContractError {
 public:
  using ContractError::ContractError;
};

// NaN/Inf during training, or an iterative method that did not converge.
// CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::size_t step = 0)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Exhaustive search hit its node cap. CLI exit code 4.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace divlab
