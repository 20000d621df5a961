#pragma once

#include <stdexcept>
#include <string>

namespace cnet {

// Base of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: wrong shapes, invalid configuration, missing files.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed or version-mismatched files and unparseable data.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset contents that cannot satisfy an operation (empty chunk, class too small).
class DataError : public Error {
 public:
  using Error::Error;
};

// A library invariant was violated during training or growth.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace cnet
