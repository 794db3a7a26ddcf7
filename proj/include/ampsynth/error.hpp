#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ampsynth {

enum class ErrorCode {
  kValidation,
  kSymmetryViolation,
  kUnreadable,
  kUnsupportedFormat,
  kDimensionMismatch,
  kWriteFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception; every failure carries a machine-checkable code.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kValidation, what);
}

}  // namespace ampsynth
