#pragma once

#include <stdexcept>
#include <string>

namespace lact {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes or sizes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid acquisition geometry or view range.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument outside the shape/geometry categories.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace lact
