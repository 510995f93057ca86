#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcreg {

/// Raised when a pose vector cannot be turned into a rotation (quaternion
/// norm too small or non-finite values).
class DegeneratePose : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch or misuse of a differentiable primitive.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pcreg
