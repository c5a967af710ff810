#pragma once

#include <stdexcept>
#include <string>

namespace kktsolve {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An index lies outside the matrix bounds.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A matrix had a sparsity pattern other than the one a frozen analysis expects.
class PatternError : public Error {
 public:
  using Error::Error;
};

/// Factorization could not find an admissible pivot.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, long column, bool structural)
      : Error(what), column_(column), structural_(structural) {}

  long column() const noexcept { return column_; }
  bool structural() const noexcept { return structural_; }

 private:
  long column_;
  bool structural_;
};

/// An operator required to be SPD produced a nonpositive curvature.
class NotSpdError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Message carries the file name and line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace kktsolve
