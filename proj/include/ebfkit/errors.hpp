#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ebfkit {

/// Broad failure class. The CLI maps `Input` to exit code 1 and
/// `Numerical` to exit code 2.
enum class ErrorCategory { Input, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define EBFKIT_DEFINE_ERROR(Name, Category)                      \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what)                       \
        : Error(ErrorCategory::Category, #Name ": " + what) {}   \
  };

// Structural / user-input errors.
EBFKIT_DEFINE_ERROR(InvalidArgument, Input)
EBFKIT_DEFINE_ERROR(MissingSlot, Input)
EBFKIT_DEFINE_ERROR(DimensionMismatch, Input)
EBFKIT_DEFINE_ERROR(EmptyDraws, Input)
EBFKIT_DEFINE_ERROR(EmptyInput, Input)
EBFKIT_DEFINE_ERROR(NonFiniteValue, Input)
EBFKIT_DEFINE_ERROR(DuplicateColumn, Input)
EBFKIT_DEFINE_ERROR(MissingColumn, Input)
EBFKIT_DEFINE_ERROR(TooShort, Input)
EBFKIT_DEFINE_ERROR(ConfigError, Input)
EBFKIT_DEFINE_ERROR(IoError, Input)

// Numerical failures.
EBFKIT_DEFINE_ERROR(NotPositiveDefinite, Numerical)
EBFKIT_DEFINE_ERROR(SingularSystem, Numerical)
EBFKIT_DEFINE_ERROR(AllDrawsDegenerate, Numerical)
EBFKIT_DEFINE_ERROR(DegenerateConditional, Numerical)
EBFKIT_DEFINE_ERROR(StudyCellInvalid, Numerical)

#undef EBFKIT_DEFINE_ERROR

/// Malformed delimited text; carries the 1-based line and column.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(ErrorCategory::Input,
              "ParseError: line " + std::to_string(line) + ", column " +
                  std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace ebfkit
