#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fdia {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data: case files, datasets, scenarios.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Text that does not parse. Line and column are 1-based; 0 means unknown.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : DataError(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line,
                            std::size_t column) {
    if (line == 0) return what;
    return "line " + std::to_string(line) + ", column " +
           std::to_string(column) + ": " + what;
  }

  std::size_t line_;
  std::size_t column_;
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/// Serialized model or dataset written by a newer format version.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

/// A numerical procedure could not produce a valid result (singular gain
/// matrix, rank deficiency beyond tolerance, exhausted retries).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace fdia
