#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vsls {

enum class ErrorCode {
  // query
  MissingSection,
  MalformedTriplet,
  UnknownRelationType,
  NoKeyObjects,
  InvalidQuery,
  // detect
  SizeMismatch,
  InvalidGrid,
  BackendUnavailable,
  ProtocolError,
  // search
  EmptyVideo,
  InvalidConfig,
  // metrics
  EmptyGroundTruth,
  EmptySet,
  DimensionMismatch,
  TooSmall,
  // synth
  InfeasibleTemplate,
  TooLarge,
  InvalidScenario,
  // files
  Io,
};

std::string_view to_string(ErrorCode code);

// Process exit code for a failure of this kind: 2 input, 3 IO, 4 backend.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failure with a 1-based source position (0 when not applicable).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, const std::string& message, std::size_t line, std::size_t column);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace vsls
