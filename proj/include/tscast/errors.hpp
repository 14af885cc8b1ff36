#pragma once

#include <stdexcept>
#include <string>

namespace tscast {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix/vector dimension mismatches. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration: violated windowing inequalities, bad CLI or
/// config-file values, model/dataset mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Problems with input data: unreadable CSV, missing columns, empty series.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A series whose min equals its max cannot be min-max normalized.
class DegenerateSeriesError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values where finite ones are required (overflowing products,
/// diverging losses, non-finite objective evaluations).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tscast
