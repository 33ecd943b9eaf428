#pragma once

#include <stdexcept>
#include <string>

namespace stablesim {

/// Input violates an operation's precondition (bad shape, out-of-range value, non-finite data).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Not enough observations to compute a statistic (e.g. a window shorter than two steps).
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A rate or ratio whose denominator is empty or zero.
class UndefinedValue : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The constrained portfolio problem has an empty feasible region.
class Infeasible : public std::runtime_error {
 public:
  Infeasible(std::string constraint_set, const std::string& detail)
      : std::runtime_error("infeasible (" + constraint_set + "): " + detail),
        constraint_set_(std::move(constraint_set)) {}

  const std::string& constraint_set() const noexcept { return constraint_set_; }

 private:
  std::string constraint_set_;
};

}  // namespace stablesim
