#include "ampsynth/error.hpp"

namespace ampsynth {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kSymmetryViolation: return "symmetry_violation";
    case ErrorCode::kUnreadable: return "unreadable";
    case ErrorCode::kUnsupportedFormat: return "unsupported_format";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kWriteFailed: return "write_failed";
  }
  return "unknown";
}

}  // namespace ampsynth
