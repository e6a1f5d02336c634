#include "hwthreat/error.hpp"

namespace hwthreat {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyDocument: return "empty_document";
    case ErrorCode::kDecodeFailure: return "decode_failure";
    case ErrorCode::kInvalidChunkParams: return "invalid_chunk_params";
    case ErrorCode::kInvalidQuery: return "invalid_query";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kDuplicateChunk: return "duplicate_chunk";
    case ErrorCode::kProviderError: return "provider_error";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kMissingBinding: return "missing_binding";
    case ErrorCode::kUnknownPlaceholder: return "unknown_placeholder";
    case ErrorCode::kSchemaViolation: return "schema_violation";
    case ErrorCode::kNoStructuredContent: return "no_structured_content";
    case ErrorCode::kUnscriptedPrompt: return "unscripted_prompt";
    case ErrorCode::kEmptyKnowledgeBase: return "empty_knowledge_base";
    case ErrorCode::kPendingAnswer: return "pending_answer";
    case ErrorCode::kNotPresented: return "not_presented";
    case ErrorCode::kEmptyAnswer: return "empty_answer";
    case ErrorCode::kMissingAnswer: return "missing_answer";
    case ErrorCode::kEmptySpecIndex: return "empty_spec_index";
    case ErrorCode::kEmptyIsaIndex: return "empty_isa_index";
    case ErrorCode::kPreconditionFailed: return "precondition_failed";
    case ErrorCode::kInvalidPhase: return "invalid_phase";
    case ErrorCode::kTerminalSession: return "terminal_session";
    case ErrorCode::kStorageFailure: return "storage_failure";
    case ErrorCode::kUnknownSession: return "unknown_session";
    case ErrorCode::kCorruptLog: return "corrupt_log";
    case ErrorCode::kSessionBusy: return "session_busy";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

ErrorClass error_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::kPendingAnswer:
    case ErrorCode::kNotPresented:
    case ErrorCode::kInvalidPhase:
    case ErrorCode::kTerminalSession:
    case ErrorCode::kSessionBusy:
      return ErrorClass::kConflict;
    case ErrorCode::kUnknownSession:
    case ErrorCode::kNotFound:
      return ErrorClass::kNotFound;
    case ErrorCode::kProviderError:
    case ErrorCode::kTimeout:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kNoStructuredContent:
    case ErrorCode::kUnscriptedPrompt:
      return ErrorClass::kUpstream;
    case ErrorCode::kStorageFailure:
    case ErrorCode::kCorruptLog:
      return ErrorClass::kServer;
    default:
      return ErrorClass::kClient;
  }
}

nlohmann::json Error::to_json() const {
  nlohmann::json j = {{"code", error_code_name(code_)}, {"message", what()}};
  if (!details_.is_null()) j["details"] = details_;
  return j;
}

}  // namespace hwthreat
