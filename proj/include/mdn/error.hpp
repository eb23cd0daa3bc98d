#pragma once

#include <stdexcept>
#include <string>

namespace mdn {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer geometry that does not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Run configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset, annotation or image input problem.
class DataError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Parameter archive corrupt or incompatible with the model it is loaded into.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace mdn
