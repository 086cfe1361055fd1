// errors.hpp
// Exception types shared by all modules. The CLI maps them to exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace qdlab {

// Region or split requests that do not fit the lattice.
struct GeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Request too large for the chosen representation.
struct FeasibilityError : std::runtime_error {
  FeasibilityError(const std::string& what, double bytes_estimate)
      : std::runtime_error(what), bytes(bytes_estimate) {}
  double bytes;
};

// Mathematical precondition on an argument (singular weights, beta range).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Iterative solver gave up.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), residual(last_residual) {}
  double residual;
};

// Violated structural precondition (non-Hermitian input, non-projector, legs).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed configuration or command line.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace qdlab
