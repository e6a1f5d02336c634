#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hwthreat {

// Registered shapes for LLM output that crosses an agent boundary.
enum class Schema { kThreatVerdict, kQueryRedundancy, kElementNames, kPolicyRecords, kTestCases };

std::string_view to_string(Schema schema);

// Human-readable description of the expected object, injected into prompts.
std::string_view schema_hint(Schema schema);

// First balanced {...} in `text` that parses as JSON. Prose and code fences
// around it are ignored.
std::optional<nlohmann::json> extract_first_object(std::string_view text);

// Validates `value` against `schema`, applying the lenient coercions listed in
// docs/coercions.md. Returns the coerced value or throws kSchemaViolation with
// a "violations" array in the details.
nlohmann::json validate_schema(const nlohmann::json& value, Schema schema);

// extract_first_object + validate_schema. Throws kNoStructuredContent when
// the response holds no JSON object at all.
nlohmann::json parse_structured(std::string_view response_text, Schema schema);

}  // namespace hwthreat
