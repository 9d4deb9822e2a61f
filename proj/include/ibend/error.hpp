#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ibend {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed s-expression. position() is the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Evaluation outside the domain of an operator (log of a nonpositive number, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A construction that should succeed on valid input did not converge or came out inconsistent.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace ibend
