#pragma once

#include <stdexcept>
#include <string>

namespace facesync {

/// Base for every error raised by the library. Messages are meant to be
/// shown to a user as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incompatible input data (CSV files, checkpoints, configs).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor or matrix shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace facesync
