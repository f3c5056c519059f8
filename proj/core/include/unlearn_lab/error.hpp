#pragma once

#include <stdexcept>
#include <string>

namespace unlearn_lab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid dimensions, out-of-range hyperparameters, empty selections.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, singular systems, failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace unlearn_lab
