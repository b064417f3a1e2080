#pragma once

#include <stdexcept>
#include <string>

namespace sfde {

/// Input outside its admissible range. Messages name the admissible interval.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (indefinite matrix, non-PSD covariance, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an ordering or sizing contract.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Throws ParameterError unless lo < value < hi.
void require_open_interval(const std::string& name, double value, double lo, double hi);

}  // namespace sfde
