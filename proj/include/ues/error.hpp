#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ues {

enum class ErrorCode {
  MalformedBundle,
  InvalidGeometry,
  DisconnectedGraph,
  UnknownArea,
  UnknownWaypoint,
  UnknownObject,
  UnknownScene,
  UnknownSession,
  UnknownTruth,
  OutOfBounds,
  EmptyInsight,
  InsightExhausted,
  InsufficientCandidates,
  MalformedPayload,
  MalformedTruth,
  MalformedTrace,
  InvalidArgument,
  SessionSubmitted,
  SessionOpen,
  StoreUnavailable,
  BindFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedBundle: return "MalformedBundle";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::UnknownArea: return "UnknownArea";
    case ErrorCode::UnknownWaypoint: return "UnknownWaypoint";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::UnknownScene: return "UnknownScene";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownTruth: return "UnknownTruth";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyInsight: return "EmptyInsight";
    case ErrorCode::InsightExhausted: return "InsightExhausted";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::MalformedTruth: return "MalformedTruth";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SessionSubmitted: return "SessionSubmitted";
    case ErrorCode::SessionOpen: return "SessionOpen";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

/// Every failure surfaced by the library carries one of the typed codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace ues
