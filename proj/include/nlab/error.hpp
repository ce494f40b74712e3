#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlab {

enum class ErrorKind {
  InvalidGeometry,
  ResolutionTooCoarse,
  EmptySet,
  InvalidParameter,
  DimensionMismatch,
  ZeroVector,
  NegativeValues,
  NonConvergence,
  ConfigValidation,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGeometry: return "invalid-geometry";
    case ErrorKind::ResolutionTooCoarse: return "resolution-too-coarse";
    case ErrorKind::EmptySet: return "empty-set";
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::ZeroVector: return "zero-vector";
    case ErrorKind::NegativeValues: return "negative-values";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::ConfigValidation: return "config-validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Base exception for every failure raised by the library. The kind is
/// stable and machine-checkable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

/// Raised by the Koch rasterizer when the grid cannot resolve the smallest
/// polygon edge. Carries the smallest resolution that would be accepted.
class ResolutionTooCoarse : public Error {
 public:
  ResolutionTooCoarse(const std::string& what, double minimal_resolution)
      : Error(ErrorKind::ResolutionTooCoarse, what), minimal_resolution_(minimal_resolution) {}

  [[nodiscard]] double minimal_resolution() const noexcept { return minimal_resolution_; }

 private:
  double minimal_resolution_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace nlab
