#pragma once

#include <stdexcept>
#include <string>

namespace g2s {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (corpus lines, checkpoints, graph files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor shapes in a differentiable primitive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during training, e.g. a non-finite gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace g2s
