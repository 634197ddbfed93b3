#pragma once

#include <stdexcept>
#include <string>

namespace tfae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File decoded but its encoding is not supported (bit depth, colour type).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Grid sizes of the operands disagree, or a grid is too small.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input data contains values the algorithm cannot process (NaN, inf).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace tfae
