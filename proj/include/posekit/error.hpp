// SPDX-License-Identifier: Apache-2.0
/**
 * @file   error.hpp
 * @brief  Exception type shared by every posekit module.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace posekit {

enum class ErrorKind {
  DegenerateInput,
  NonPositiveDepth,
  BehindCamera,
  InfeasibleMatrix,
  TooLarge,
  DimensionMismatch,
  EmptyAssignment,
  SchemaError,
  InvariantError,
  IoError,
};

inline const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::DegenerateInput: return "DegenerateInput";
  case ErrorKind::NonPositiveDepth: return "NonPositiveDepth";
  case ErrorKind::BehindCamera: return "BehindCamera";
  case ErrorKind::InfeasibleMatrix: return "InfeasibleMatrix";
  case ErrorKind::TooLarge: return "TooLarge";
  case ErrorKind::DimensionMismatch: return "DimensionMismatch";
  case ErrorKind::EmptyAssignment: return "EmptyAssignment";
  case ErrorKind::SchemaError: return "SchemaError";
  case ErrorKind::InvariantError: return "InvariantError";
  case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Error raised by posekit operations. `line` and `field` are only set by
/// the scene and config readers (line 0 means "not from a file").
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &message, std::size_t line = 0,
        std::string field = {})
      : std::runtime_error(format(kind, message, line, field)), kind_(kind),
        line_(line), field_(std::move(field)) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }
  const std::string &field() const noexcept { return field_; }

private:
  static std::string format(ErrorKind kind, const std::string &message,
                            std::size_t line, const std::string &field) {
    std::string out = to_string(kind);
    if (line > 0)
      out += " at line " + std::to_string(line);
    if (!field.empty())
      out += " (field '" + field + "')";
    out += ": " + message;
    return out;
  }

  ErrorKind kind_;
  std::size_t line_;
  std::string field_;
};

} // namespace posekit
