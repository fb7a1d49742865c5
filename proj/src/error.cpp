#include "direct6d/error.hpp"

namespace direct6d {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularRotation: return "SingularRotation";
    case ErrorCode::DegenerateDepth: return "DegenerateDepth";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::OutOfFrustum: return "OutOfFrustum";
    case ErrorCode::UnencodableOffset: return "UnencodableOffset";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::GridSizeMismatch: return "GridSizeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateAnnotation: return "DegenerateAnnotation";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoFixedPoint: return "NoFixedPoint";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonOrthonormal: return "NonOrthonormal";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

DegenerateDepthError::DegenerateDepthError(std::size_t index, double depth)
    : Error(ErrorCode::DegenerateDepth,
            "corner " + std::to_string(index) + " has camera depth " +
                std::to_string(depth) + " (must be > epsilon)"),
      index_(index) {}

ParseError::ParseError(const std::string& what, std::size_t line,
                       std::size_t column)
    : Error(ErrorCode::ParseError, what + " at line " + std::to_string(line) +
                                       ", column " + std::to_string(column)),
      line_(line),
      column_(column) {}

}  // namespace direct6d
