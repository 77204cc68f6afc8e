#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alrnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A simulated state became non-finite or left the admissible range.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (divergence at step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Malformed input file (CSV, JSON).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or config file does not match the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace alrnn
