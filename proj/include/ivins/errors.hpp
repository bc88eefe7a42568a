#pragma once

#include <stdexcept>
#include <string>

namespace ivins {

/// Raised when a caller breaks a documented precondition (dimension mismatch,
/// empty input, invalid configuration value).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace ivins
