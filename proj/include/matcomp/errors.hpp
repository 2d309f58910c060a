#pragma once

#include <stdexcept>
#include <string>

namespace matcomp {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: out-of-range indices, non-finite values, bad configs.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Operand shapes that do not agree.
class DimensionMismatchError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

// Well-formed input on which the computation has no meaningful answer
// (rank-deficient basis, all-zero design, flat spectrum).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// An iterative routine produced a non-finite value.
class NumericFailureError : public Error {
 public:
  NumericFailureError(const std::string& what, long iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

// A bilinear query whose projection onto the fitted subspaces vanishes.
class DegenerateQueryError : public Error {
 public:
  using Error::Error;
};

}  // namespace matcomp
