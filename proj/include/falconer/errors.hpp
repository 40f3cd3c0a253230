#pragma once

#include <stdexcept>
#include <string>

namespace falconer {

/// Invalid or inconsistent experiment/object configuration.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input that makes the requested quantity undefined (e.g. a single atom).
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computed quantity failed an internal consistency check.
class NumericalIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejection sampling could not produce an admissible sample.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Perturbed level-set correction did not converge.
class PerturbationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace falconer
