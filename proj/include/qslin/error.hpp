#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qslin {

/// Base class for every error raised by the library.
///
/// The category doubles as the CLI exit code: validation problems (bad
/// input, bad config) are 2, failed mathematical conditions (equilibrium
/// structure checks, no admissible chain lengths) are 3, and numeric
/// failures (solver divergence, singular matrices along a trajectory) are 4.
class Error : public std::runtime_error {
 public:
  enum class Category { Validation = 2, MathCondition = 3, Numeric = 4 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  Category category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Category::Validation, what) {}
};

class MathConditionError : public Error {
 public:
  explicit MathConditionError(const std::string& what) : Error(Category::MathCondition, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Category::Numeric, what) {}
};

/// Syntax error in the expression DSL; `position` is a 0-based byte offset.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& message, std::size_t position)
      : ValidationError(message + " at position " + std::to_string(position)),
        message_(message),
        position_(position) {}

  const std::string& message() const noexcept { return message_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::string message_;
  std::size_t position_;
};

/// Evaluation failure: unbound variable or an analytic singularity.
class EvalError : public NumericError {
 public:
  explicit EvalError(const std::string& what) : NumericError(what) {}
};

}  // namespace qslin
