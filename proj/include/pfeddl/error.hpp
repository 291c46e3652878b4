#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pfeddl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands with incompatible dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration, hyperparameters or synthetic spec.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be processed, e.g. a constant ROI time series.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Well-formed text whose content disagrees with its declared header.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t line)
      : Error(message + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error(message + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pfeddl
