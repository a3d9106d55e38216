#pragma once

#include <stdexcept>
#include <string>

namespace psm {

/// Invalid scenario or parameter set. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the domain of an operation (e.g. SIR of the null allocation).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A precondition or structural identity of the mechanism was violated.
/// The CLI maps this to exit code 3; it must never fire on valid input.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Exact arithmetic left the representable range.
class OverflowError : public std::overflow_error {
 public:
  explicit OverflowError(const std::string& what) : std::overflow_error(what) {}
};

}  // namespace psm
