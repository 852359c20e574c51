#include "vsls/error.hpp"

namespace vsls {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::MalformedTriplet: return "MalformedTriplet";
    case ErrorCode::UnknownRelationType: return "UnknownRelationType";
    case ErrorCode::NoKeyObjects: return "NoKeyObjects";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::EmptyVideo: return "EmptyVideo";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::InfeasibleTemplate: return "InfeasibleTemplate";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return 3;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ProtocolError: return 4;
    default: return 2;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

ParseError::ParseError(ErrorCode code, const std::string& message, std::size_t line,
                       std::size_t column)
    : Error(code, message + (line > 0 ? " (line " + std::to_string(line) + ", column " +
                                            std::to_string(column) + ")"
                                      : std::string())),
      line_(line),
      column_(column) {}

}  // namespace vsls
