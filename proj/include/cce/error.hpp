#pragma once

#include <stdexcept>
#include <string>

namespace cce {

// Error taxonomy shared by every module. The CLI maps ValidationError and its
// subclasses to exit code 1 and NumericError to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: shapes, arguments, files, formats.
struct ValidationError : Error {
  using Error::Error;
};

// Non-finite values or numeric overflow during computation.
struct NumericError : Error {
  using Error::Error;
};

struct DimensionError : ValidationError {
  using ValidationError::ValidationError;
};

struct ArgumentError : ValidationError {
  using ValidationError::ValidationError;
};

struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};

// Checkpoint pairing violations (e.g. an NER model applied with a language
// model other than the one it was trained against).
struct IntegrityError : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace cce
