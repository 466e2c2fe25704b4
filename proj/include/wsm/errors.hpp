#pragma once

#include <stdexcept>
#include <string>

namespace wsm {

/// Invalid configuration or precondition violation detected before any work.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Kernel weights vanished at the query point; callers treat it as trimming.
class EmptyNeighborhood : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An estimator could not produce a value (every unit dropped, empty subsample).
class EstimatorUndefined : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace wsm
