#pragma once

#include <stdexcept>
#include <string>

namespace dst {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, violated invariants, misaligned arguments.
struct DataError : Error {
  using Error::Error;
};

struct ParseError : DataError {
  ParseError(const std::string& what, long line)
      : DataError("line " + std::to_string(line) + ": " + what), line(line) {}
  long line;
};

struct ValidationError : DataError {
  using DataError::DataError;
};

struct InvalidGoldTree : DataError {
  using DataError::DataError;
};

struct EmptyGold : DataError {
  using DataError::DataError;
};

struct InstanceTooLarge : DataError {
  using DataError::DataError;
};

// Numerical trouble in inference or optimization.
struct NumericalError : Error {
  using Error::Error;
};

// The constraint mask admits no directed spanning arborescence.
struct NoValidTree : NumericalError {
  using NumericalError::NumericalError;
};

struct DivergenceDetected : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace dst
