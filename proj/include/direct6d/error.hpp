#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace direct6d {

enum class ErrorCode {
  InvalidArgument,
  SingularRotation,
  DegenerateDepth,
  LengthMismatch,
  OutOfFrustum,
  UnencodableOffset,
  EmptyGrid,
  GridSizeMismatch,
  NonFinite,
  NoConvergence,
  DegenerateAnnotation,
  RankDeficient,
  NoFixedPoint,
  SingularTransform,
  EmptySet,
  ParseError,
  NonOrthonormal,
  IoError,
  SchemaViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a stable code so the CLI and
// the service can map it to exit codes / HTTP bodies without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DegenerateDepthError : public Error {
 public:
  DegenerateDepthError(std::size_t index, double depth);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace direct6d
