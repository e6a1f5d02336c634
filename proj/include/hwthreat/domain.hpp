#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/corpus.hpp"

namespace hwthreat {

enum class Flow { kPhysicalSupplyChain, kSoftwareExploitable };
std::string_view to_string(Flow flow);
std::optional<Flow> parse_flow(std::string_view s);

// ---- Threat identification ------------------------------------------------

struct ThreatCategory {
  std::string category_id;
  std::string label;
  std::string description;
  std::string query;  // predefined retrieval query

  bool operator==(const ThreatCategory&) const = default;
};

// Parses a catalog document (assets/threat_catalog.json layout).
std::vector<ThreatCategory> parse_catalog(const nlohmann::json& j);
std::vector<ThreatCategory> default_catalog();

struct EvidenceHit {
  std::string chunk_id;
  double score = 0.0;
  std::size_t rank = 0;
  std::string text;

  bool operator==(const EvidenceHit&) const = default;
};

struct EvidenceBundle {
  std::string category_id;
  std::string query_used;
  std::vector<EvidenceHit> hits;

  bool empty() const { return hits.empty(); }
  bool operator==(const EvidenceBundle&) const = default;
};

enum class QueryStatus { kActive, kAsked, kRemoved };
std::string_view to_string(QueryStatus s);

struct Query {
  std::string query_id;
  std::string text;
  QueryStatus status = QueryStatus::kActive;
  std::string removal_reason;
  bool mandatory = true;

  bool operator==(const Query&) const = default;
};

// Statuses only move active -> asked or active -> removed. At most one
// query is presented (awaiting its answer) at a time.
struct QueryBank {
  std::vector<Query> queries;
  std::optional<std::string> presented;
  bool initialized = false;

  const Query* find(std::string_view id) const;
  Query* find(std::string_view id);
  // Position of the first active query, or queries.size().
  std::size_t cursor() const;
  std::size_t count(QueryStatus s) const;

  bool operator==(const QueryBank&) const = default;
};

std::vector<Query> parse_query_list(const nlohmann::json& j);
std::vector<Query> default_query_bank();
std::vector<Query> default_capability_queries();

struct TranscriptEntry {
  std::string query_id;
  std::string query_text;
  std::string answer_text;
  std::int64_t timestamp_ms = 0;

  bool operator==(const TranscriptEntry&) const = default;
};

enum class ThreatStatus { kCandidate, kRetained, kPruned };
std::string_view to_string(ThreatStatus s);
std::optional<ThreatStatus> parse_threat_status(std::string_view s);

struct ThreatAssessment {
  std::string category_id;
  std::string label;
  ThreatStatus status = ThreatStatus::kCandidate;
  std::string rationale;
  std::vector<std::string> evidence_refs;
  int decided_at = 0;     // iteration that set the current status
  int assessed_at = 0;    // last iteration an assessment was attempted
  std::string flag;       // non-empty when the last assessment could not be parsed

  bool operator==(const ThreatAssessment&) const = default;
};

// ---- Security policies ----------------------------------------------------

enum class ElementKind { kRegister, kInstruction };
std::string_view to_string(ElementKind k);
std::optional<ElementKind> parse_element_kind(std::string_view s);

// Lowercase, trimmed, internal whitespace collapsed.
std::string normalize_element_key(std::string_view name);

struct ElementRef {
  ElementKind kind = ElementKind::kRegister;
  std::string norm_key;

  auto operator<=>(const ElementRef&) const = default;
};

struct DesignElement {
  ElementKind kind = ElementKind::kRegister;
  std::string name;  // first surface form seen
  std::string norm_key;
  std::vector<std::string> source_refs;  // sorted, unique

  ElementRef ref() const { return {kind, norm_key}; }
  bool operator==(const DesignElement&) const = default;
};

struct RawPolicySnippet {
  ElementRef element;
  std::string chunk_id;
  std::string text;
  double score = 0.0;
  std::size_t rank = 0;

  bool operator==(const RawPolicySnippet&) const = default;
};

enum class RiskTag {
  kPrivilegeEscalation,
  kAccessControl,
  kMemoryCorruption,
  kUnauthorizedAccess,
  kMicroarchitecturalSideChannel,
  kIntegrity,
  kAvailability,
  kConfidentiality,
};
std::string_view to_string(RiskTag t);
const std::vector<RiskTag>& all_risk_tags();
// Maps free text ("Access control weakness", "side-channel", ...) onto the
// closed vocabulary; nullopt when nothing fits.
std::optional<RiskTag> parse_risk_tag(std::string_view s);

// Whitespace collapsed, trailing periods replaced by exactly one.
std::string normalize_statement(std::string_view s);
// "pol-" + 16 hex digits of SHA-256 over the lowercased normalized statement.
std::string policy_id_for(std::string_view normalized_statement);

struct SecurityPolicy {
  std::string policy_id;
  std::string statement;
  std::vector<ElementRef> related_elements;  // sorted, unique
  std::string security_relevance;
  std::vector<RiskTag> risk_tags;             // sorted, unique, non-empty
  std::vector<std::string> source_refs;       // sorted, unique

  bool operator==(const SecurityPolicy&) const = default;
};

// ---- Test plans -------------------------------------------------------------

enum class Modality { kFormalVerification, kEmulation, kSimulation, kPhysicalTesting };
std::string_view to_string(Modality m);
std::string_view display_name(Modality m);
// Accepts "formal_verification", "Formal Verification", "formal", ...
std::optional<Modality> parse_modality(std::string_view s);

struct VerificationCapabilities {
  std::set<Modality> modalities_available;
  std::map<Modality, std::vector<std::string>> tools;
  std::string budget_note;
  std::string time_allocation;
  std::string infrastructure_notes;
  std::vector<std::string> flags;  // unanswered optional fields, dropped tools

  bool operator==(const VerificationCapabilities&) const = default;
};

struct TestCase {
  std::string case_id;
  std::string threat_category;
  std::string test_objective;
  std::map<Modality, std::string> methodology;
  std::map<Modality, std::string> expected_result;
  std::map<Modality, std::string> evaluation_criteria;
  std::map<Modality, std::vector<std::string>> testing_tools;
  std::string provenance;  // upstream category_id or policy_id

  bool operator==(const TestCase&) const = default;
};

struct SkipRecord {
  std::string item_id;
  std::string reason;

  bool operator==(const SkipRecord&) const = default;
};

struct PlanMetadata {
  std::map<std::string, std::string> template_versions;
  std::string model_name;
  std::string source_artifact;  // "threat_list" or "policy_list"
  std::vector<std::string> item_ids;  // in-scope upstream items

  bool operator==(const PlanMetadata&) const = default;
};

struct TestPlan {
  std::string plan_id;
  Flow flow = Flow::kPhysicalSupplyChain;
  std::vector<TestCase> cases;
  std::vector<SkipRecord> skipped;
  VerificationCapabilities capability_snapshot;
  PlanMetadata metadata;
  std::vector<std::string> flags;

  bool operator==(const TestPlan&) const = default;
};

// ---- JSON ---------------------------------------------------------------------

void to_json(nlohmann::json& j, const ThreatCategory& v);
void to_json(nlohmann::json& j, const EvidenceHit& v);
void from_json(const nlohmann::json& j, EvidenceHit& v);
void to_json(nlohmann::json& j, const EvidenceBundle& v);
void from_json(const nlohmann::json& j, EvidenceBundle& v);
void to_json(nlohmann::json& j, const Query& v);
void from_json(const nlohmann::json& j, Query& v);
void to_json(nlohmann::json& j, const TranscriptEntry& v);
void to_json(nlohmann::json& j, const ThreatAssessment& v);
void from_json(const nlohmann::json& j, ThreatAssessment& v);
void to_json(nlohmann::json& j, const ElementRef& v);
void from_json(const nlohmann::json& j, ElementRef& v);
void to_json(nlohmann::json& j, const DesignElement& v);
void from_json(const nlohmann::json& j, DesignElement& v);
void to_json(nlohmann::json& j, const RawPolicySnippet& v);
void from_json(const nlohmann::json& j, RawPolicySnippet& v);
void to_json(nlohmann::json& j, const SecurityPolicy& v);
void from_json(const nlohmann::json& j, SecurityPolicy& v);
void to_json(nlohmann::json& j, const VerificationCapabilities& v);
void from_json(const nlohmann::json& j, VerificationCapabilities& v);
void to_json(nlohmann::json& j, const TestCase& v);
void from_json(const nlohmann::json& j, TestCase& v);
void to_json(nlohmann::json& j, const SkipRecord& v);
void from_json(const nlohmann::json& j, SkipRecord& v);
void to_json(nlohmann::json& j, const TestPlan& v);
void from_json(const nlohmann::json& j, TestPlan& v);

}  // namespace hwthreat
