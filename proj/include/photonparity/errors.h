#pragma once

#include <stdexcept>
#include <string>

namespace photonparity {

// Argument outside the mathematical domain of an operation (T > 1, L >= 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A heralding outcome with zero probability was requested.
class EmptyBranchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InconsistentBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed user input (config files, CSV rows, CLI flags).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace photonparity
