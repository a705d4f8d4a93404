#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vista {

enum class ErrorCode {
  kShapeMismatch,
  kInvalidArgument,
  kNonFinite,
  kBudgetExceeded,
  kUnknownOp,
  kParse,
  kIo,
  kCorrupt,
  kVersionMismatch,
  kManifestMismatch,
  kDiverged,
};

std::string_view to_string(ErrorCode code);

/// Structured error carried by every failing public operation.
/// `code()` identifies the failure class; `what()` holds a message that names
/// the offending shapes, keys or tensors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vista
