#pragma once

#include <stdexcept>
#include <string>

namespace pofd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, unreadable paths, invalid user-supplied values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a result for the given data.
class ComputationError : public Error {
 public:
  using Error::Error;
};

}  // namespace pofd
