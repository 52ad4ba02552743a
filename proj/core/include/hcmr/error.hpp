#pragma once

#include <stdexcept>
#include <string>

namespace hcmr {

// Base for every error raised by the library. Callers that only care about
// "something went wrong in hcmr" can catch this; the subclasses name the
// failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (logits, losses).
class NumericError : public Error {
 public:
  using Error::Error;
};

// A ConstraintSet that cannot be honoured (clamp against a zero allow entry,
// cyclic priority relations, conflicting overrides).
class ConstraintError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken; indicates a bug rather than bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Operation called outside its precondition (e.g. rule selection on a source).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Exact enumeration requested beyond its configured budget.
class TractabilityError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : ParseError(what, 0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hcmr
