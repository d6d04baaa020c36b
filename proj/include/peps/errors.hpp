#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace peps {

/// Shape or index-label inconsistency (offending label reported in message).
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input violates an operation precondition (bad bits, bad coordinate, ...).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A computation would exceed the configured memory budget.
struct ResourceError : std::runtime_error {
  ResourceError(const std::string& msg, std::size_t required_elements)
      : std::runtime_error(msg), required_elements(required_elements) {}
  std::size_t required_elements = 0;
};

/// Dense kernel failed to converge or produced a degenerate result.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed configuration (CLI maps this to exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace peps
