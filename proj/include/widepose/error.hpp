#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace widepose {

enum class ErrorCode {
  kInvalidArgument,
  kNonPositiveDepth,
  kOutOfBounds,
  kDegenerateHull,
  kNonPositiveSize,
  kZeroRay,
  kDegenerateConfiguration,
  kNoConsensus,
  kNoDetection,
  kZeroTranslation,
  kOutOfRange,
  kObjectNotVisible,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every recoverable domain failure in the library is reported through this
// type; callers switch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kDegenerateHull: return "DegenerateHull";
    case ErrorCode::kNonPositiveSize: return "NonPositiveSize";
    case ErrorCode::kZeroRay: return "ZeroRay";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kNoDetection: return "NoDetection";
    case ErrorCode::kZeroTranslation: return "ZeroTranslation";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kObjectNotVisible: return "ObjectNotVisible";
  }
  return "Unknown";
}

}  // namespace widepose
