#pragma once

#include <stdexcept>
#include <string>

namespace bbm {

/// Input rejected by a constructor or parser (bad shape, bad config).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation
/// (e.g. lambda0 requested for a subcritical intensity).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// An iterative method failed to converge, or produced non-finite output.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace bbm
