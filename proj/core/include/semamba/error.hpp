#pragma once

#include <stdexcept>
#include <string>

namespace semamba {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes (config 2, data 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or container shapes disagree with the operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent on-disk data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or state during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace semamba
