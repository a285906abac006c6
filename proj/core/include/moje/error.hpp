#pragma once

#include <stdexcept>
#include <string>

namespace moje {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input data (datasets, vocabulary files, configs).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a call was violated (wrong dimensions, missing class...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace moje
