#pragma once

#include <stdexcept>
#include <string>

namespace fsir {

// Failure categories surfaced by the library. Each maps to one machine-readable
// token so callers (and the CLI) can react without parsing messages.
enum class ErrorKind {
  EmptyWindow,          // no data in a kernel window after maximum widening
  DegenerateDesign,     // design not rich enough for the requested fit order
  AllNonpositive,       // operator has no positive eigenvalues
  RankTooSmall,         // requested k exceeds the usable rank
  GridMismatch,         // two functions/operators live on different grids
  DegenerateVariance,   // correlation/normalization of a (near-)constant vector
  ParseError,           // malformed CSV input
  InconsistentResponse, // subject rows carry conflicting response values
  OutOfInterval,        // observation time outside the declared interval
  ConfigInvalid,        // invalid configuration or precondition violation
  EmptyEstimateList,    // metrics invoked on an empty estimate set
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::AllNonpositive: return "AllNonpositive";
    case ErrorKind::RankTooSmall: return "RankTooSmall";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InconsistentResponse: return "InconsistentResponse";
    case ErrorKind::OutOfInterval: return "OutOfInterval";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::EmptyEstimateList: return "EmptyEstimateList";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = "")
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        field_(std::move(field)) {}

  ErrorKind kind() const { return kind_; }
  // Offending config/input field, when one can be named.
  const std::string& field() const { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

}  // namespace fsir
