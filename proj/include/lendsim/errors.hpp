#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lendsim {

/// Input outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Regression design that cannot identify both coefficients.
class SingularDesign : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent scenario description.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// No parameter value satisfies the requested constraint.
class Infeasible : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A pool invariant broke during simulation. Carries the slot index.
class InvariantViolation : public std::runtime_error {
public:
  InvariantViolation(std::int64_t slot, const std::string& what)
      : std::runtime_error("slot " + std::to_string(slot) + ": " + what), slot_(slot) {}
  std::int64_t slot() const noexcept { return slot_; }

private:
  std::int64_t slot_;
};

} // namespace lendsim
