#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace hwthreat {

// Closed set of engine error kinds. Each maps 1:1 onto a stable machine code
// (see error_code_name) used by the CLI and the HTTP service.
enum class ErrorCode {
  kEmptyDocument,
  kDecodeFailure,
  kInvalidChunkParams,
  kInvalidQuery,
  kDimensionMismatch,
  kDuplicateChunk,
  kProviderError,
  kTimeout,
  kMissingBinding,
  kUnknownPlaceholder,
  kSchemaViolation,
  kNoStructuredContent,
  kUnscriptedPrompt,
  kEmptyKnowledgeBase,
  kPendingAnswer,
  kNotPresented,
  kEmptyAnswer,
  kMissingAnswer,
  kEmptySpecIndex,
  kEmptyIsaIndex,
  kPreconditionFailed,
  kInvalidPhase,
  kTerminalSession,
  kStorageFailure,
  kUnknownSession,
  kCorruptLog,
  kSessionBusy,
  kNotFound,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// Broad class used to pick an HTTP status and a CLI exit code.
enum class ErrorClass { kClient, kConflict, kNotFound, kUpstream, kServer };
ErrorClass error_class(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, nlohmann::json details = nullptr)
      : std::runtime_error(std::move(message)), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  // Provider errors carry whether a retry may succeed.
  bool retryable() const noexcept {
    return details_.is_object() && details_.value("retryable", false);
  }

  // {"code": ..., "message": ..., "details": ...}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

inline Error provider_error(std::string message, bool retryable) {
  return Error(ErrorCode::kProviderError, std::move(message), {{"retryable", retryable}});
}

}  // namespace hwthreat
