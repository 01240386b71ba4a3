#pragma once

#include <stdexcept>
#include <string>

namespace tsen {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf appeared, or a factorization failed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The data cannot support the request (e.g. too few observations).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A panel file is malformed.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Stochastic generation gave up (e.g. no stationary draw found).
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Bad command-line or configuration input. Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsen
