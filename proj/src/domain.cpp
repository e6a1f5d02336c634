#include "hwthreat/domain.hpp"

#include <algorithm>
#include <cctype>

#include "hwthreat/assets.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {

using nlohmann::json;

std::string_view to_string(Flow flow) {
  return flow == Flow::kPhysicalSupplyChain ? "physical_supply_chain" : "software_exploitable";
}

std::optional<Flow> parse_flow(std::string_view s) {
  if (s == "physical_supply_chain" || s == "flow1") return Flow::kPhysicalSupplyChain;
  if (s == "software_exploitable" || s == "flow2") return Flow::kSoftwareExploitable;
  return std::nullopt;
}

// ---- threats ------------------------------------------------------------------

std::vector<ThreatCategory> parse_catalog(const json& j) {
  std::vector<ThreatCategory> out;
  for (const json& c : j) {
    out.push_back({c.at("category_id").get<std::string>(), c.at("label").get<std::string>(),
                   c.at("description").get<std::string>(), c.at("query").get<std::string>()});
  }
  return out;
}

std::vector<ThreatCategory> default_catalog() {
  return parse_catalog(json::parse(assets::text("threat_catalog.json")));
}

const Query* QueryBank::find(std::string_view id) const {
  auto it = std::find_if(queries.begin(), queries.end(), [&](const Query& q) { return q.query_id == id; });
  return it == queries.end() ? nullptr : &*it;
}

Query* QueryBank::find(std::string_view id) {
  return const_cast<Query*>(static_cast<const QueryBank*>(this)->find(id));
}

std::size_t QueryBank::cursor() const {
  auto it = std::find_if(queries.begin(), queries.end(),
                         [](const Query& q) { return q.status == QueryStatus::kActive; });
  return static_cast<std::size_t>(it - queries.begin());
}

std::size_t QueryBank::count(QueryStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(queries.begin(), queries.end(), [&](const Query& q) { return q.status == s; }));
}

std::string_view to_string(QueryStatus s) {
  switch (s) {
    case QueryStatus::kActive: return "active";
    case QueryStatus::kAsked: return "asked";
    case QueryStatus::kRemoved: return "removed";
  }
  return "active";
}

std::vector<Query> parse_query_list(const json& j) {
  std::vector<Query> out;
  std::set<std::string> seen;
  for (const json& q : j) {
    Query query;
    query.query_id = q.at("query_id").get<std::string>();
    query.text = q.at("text").get<std::string>();
    query.mandatory = q.value("mandatory", true);
    if (!seen.insert(query.query_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate query id " + query.query_id);
    }
    out.push_back(std::move(query));
  }
  return out;
}

std::vector<Query> default_query_bank() { return parse_query_list(json::parse(assets::text("query_bank.json"))); }

std::vector<Query> default_capability_queries() {
  return parse_query_list(json::parse(assets::text("capability_queries.json")));
}

std::string_view to_string(ThreatStatus s) {
  switch (s) {
    case ThreatStatus::kCandidate: return "candidate";
    case ThreatStatus::kRetained: return "retained";
    case ThreatStatus::kPruned: return "pruned";
  }
  return "candidate";
}

std::optional<ThreatStatus> parse_threat_status(std::string_view s) {
  if (s == "candidate") return ThreatStatus::kCandidate;
  if (s == "retained") return ThreatStatus::kRetained;
  if (s == "pruned") return ThreatStatus::kPruned;
  return std::nullopt;
}

// ---- policies ---------------------------------------------------------------

std::string_view to_string(ElementKind k) { return k == ElementKind::kRegister ? "register" : "instruction"; }

std::optional<ElementKind> parse_element_kind(std::string_view s) {
  if (s == "register") return ElementKind::kRegister;
  if (s == "instruction") return ElementKind::kInstruction;
  return std::nullopt;
}

std::string normalize_element_key(std::string_view name) {
  return text::to_lower(text::collapse_whitespace(name));
}

std::string_view to_string(RiskTag t) {
  switch (t) {
    case RiskTag::kPrivilegeEscalation: return "privilege_escalation";
    case RiskTag::kAccessControl: return "access_control";
    case RiskTag::kMemoryCorruption: return "memory_corruption";
    case RiskTag::kUnauthorizedAccess: return "unauthorized_access";
    case RiskTag::kMicroarchitecturalSideChannel: return "microarchitectural_side_channel";
    case RiskTag::kIntegrity: return "integrity";
    case RiskTag::kAvailability: return "availability";
    case RiskTag::kConfidentiality: return "confidentiality";
  }
  return "integrity";
}

const std::vector<RiskTag>& all_risk_tags() {
  static const std::vector<RiskTag> tags = {
      RiskTag::kPrivilegeEscalation, RiskTag::kAccessControl,
      RiskTag::kMemoryCorruption,    RiskTag::kUnauthorizedAccess,
      RiskTag::kMicroarchitecturalSideChannel, RiskTag::kIntegrity,
      RiskTag::kAvailability,        RiskTag::kConfidentiality};
  return tags;
}

namespace {
// Lowercase with every non-alphanumeric run turned into one space.
std::string loose(std::string_view s) {
  std::string out;
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    out.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
  }
  return text::collapse_whitespace(out);
}

bool has(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }
}  // namespace

std::optional<RiskTag> parse_risk_tag(std::string_view s) {
  std::string t = loose(s);
  if (t.empty()) return std::nullopt;
  if (has(t, "privilege")) return RiskTag::kPrivilegeEscalation;
  if (has(t, "unauthori")) return RiskTag::kUnauthorizedAccess;
  if (has(t, "access control")) return RiskTag::kAccessControl;
  if (has(t, "memory corruption") || has(t, "buffer overflow")) return RiskTag::kMemoryCorruption;
  if (has(t, "side channel") || has(t, "microarchitectural")) return RiskTag::kMicroarchitecturalSideChannel;
  if (has(t, "integrity")) return RiskTag::kIntegrity;
  if (has(t, "availability") || has(t, "denial of service")) return RiskTag::kAvailability;
  if (has(t, "confidentiality") || has(t, "leak")) return RiskTag::kConfidentiality;
  return std::nullopt;
}

std::string normalize_statement(std::string_view s) {
  std::string out = text::collapse_whitespace(s);
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  if (!out.empty()) out.push_back('.');
  return out;
}

std::string policy_id_for(std::string_view normalized_statement) {
  return "pol-" + text::sha256_hex(text::to_lower(normalized_statement)).substr(0, 16);
}

// ---- plans ------------------------------------------------------------------

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kFormalVerification: return "formal_verification";
    case Modality::kEmulation: return "emulation";
    case Modality::kSimulation: return "simulation";
    case Modality::kPhysicalTesting: return "physical_testing";
  }
  return "simulation";
}

std::string_view display_name(Modality m) {
  switch (m) {
    case Modality::kFormalVerification: return "Formal Verification";
    case Modality::kEmulation: return "Emulation";
    case Modality::kSimulation: return "Simulation";
    case Modality::kPhysicalTesting: return "Physical Testing";
  }
  return "Simulation";
}

std::optional<Modality> parse_modality(std::string_view s) {
  std::string t = loose(s);
  if (t.rfind("formal", 0) == 0) return Modality::kFormalVerification;
  if (t.rfind("emulat", 0) == 0) return Modality::kEmulation;
  if (t.rfind("simulat", 0) == 0) return Modality::kSimulation;
  if (t.rfind("physical", 0) == 0) return Modality::kPhysicalTesting;
  return std::nullopt;
}

// ---- JSON -------------------------------------------------------------------

namespace {

template <typename V>
json modality_map_to_json(const std::map<Modality, V>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[std::string(to_string(k))] = v;
  return out;
}

template <typename V>
std::map<Modality, V> modality_map_from_json(const json& j) {
  std::map<Modality, V> out;
  for (const auto& [k, v] : j.items()) {
    auto m = parse_modality(k);
    if (!m) throw Error(ErrorCode::kInvalidArgument, "unknown modality: " + k);
    out[*m] = v.template get<V>();
  }
  return out;
}

}  // namespace

void to_json(json& j, const ThreatCategory& v) {
  j = {{"category_id", v.category_id}, {"label", v.label}, {"description", v.description}, {"query", v.query}};
}

void to_json(json& j, const EvidenceHit& v) {
  j = {{"chunk_id", v.chunk_id}, {"score", v.score}, {"rank", v.rank}, {"text", v.text}};
}

void from_json(const json& j, EvidenceHit& v) {
  v.chunk_id = j.at("chunk_id").get<std::string>();
  v.score = j.at("score").get<double>();
  v.rank = j.at("rank").get<std::size_t>();
  v.text = j.at("text").get<std::string>();
}

void to_json(json& j, const EvidenceBundle& v) {
  j = {{"category_id", v.category_id}, {"query_used", v.query_used}, {"hits", v.hits}};
}

void from_json(const json& j, EvidenceBundle& v) {
  v.category_id = j.at("category_id").get<std::string>();
  v.query_used = j.at("query_used").get<std::string>();
  v.hits = j.at("hits").get<std::vector<EvidenceHit>>();
}

void to_json(json& j, const Query& v) {
  j = {{"query_id", v.query_id}, {"text", v.text}, {"status", to_string(v.status)}, {"mandatory", v.mandatory}};
  if (!v.removal_reason.empty()) j["removal_reason"] = v.removal_reason;
}

void from_json(const json& j, Query& v) {
  v.query_id = j.at("query_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.mandatory = j.value("mandatory", true);
  std::string s = j.value("status", std::string("active"));
  v.status = s == "asked" ? QueryStatus::kAsked : s == "removed" ? QueryStatus::kRemoved : QueryStatus::kActive;
  v.removal_reason = j.value("removal_reason", std::string());
}

void to_json(json& j, const TranscriptEntry& v) {
  j = {{"query_id", v.query_id}, {"query_text", v.query_text}, {"answer_text", v.answer_text}};
}

void to_json(json& j, const ThreatAssessment& v) {
  j = {{"category_id", v.category_id},     {"label", v.label},
       {"status", to_string(v.status)},    {"rationale", v.rationale},
       {"evidence_refs", v.evidence_refs}, {"decided_at", v.decided_at},
       {"assessed_at", v.assessed_at}};
  if (!v.flag.empty()) j["flag"] = v.flag;
}

void from_json(const json& j, ThreatAssessment& v) {
  v.category_id = j.at("category_id").get<std::string>();
  v.label = j.at("label").get<std::string>();
  auto status = parse_threat_status(j.at("status").get<std::string>());
  if (!status) throw Error(ErrorCode::kInvalidArgument, "unknown threat status");
  v.status = *status;
  v.rationale = j.at("rationale").get<std::string>();
  v.evidence_refs = j.at("evidence_refs").get<std::vector<std::string>>();
  v.decided_at = j.at("decided_at").get<int>();
  v.assessed_at = j.value("assessed_at", 0);
  v.flag = j.value("flag", std::string());
}

void to_json(json& j, const ElementRef& v) { j = {{"kind", to_string(v.kind)}, {"norm_key", v.norm_key}}; }

void from_json(const json& j, ElementRef& v) {
  auto k = parse_element_kind(j.at("kind").get<std::string>());
  if (!k) throw Error(ErrorCode::kInvalidArgument, "unknown element kind");
  v.kind = *k;
  v.norm_key = j.at("norm_key").get<std::string>();
}

void to_json(json& j, const DesignElement& v) {
  j = {{"kind", to_string(v.kind)}, {"name", v.name}, {"norm_key", v.norm_key}, {"source_refs", v.source_refs}};
}

void from_json(const json& j, DesignElement& v) {
  ElementRef r = j.get<ElementRef>();
  v.kind = r.kind;
  v.norm_key = r.norm_key;
  v.name = j.at("name").get<std::string>();
  v.source_refs = j.at("source_refs").get<std::vector<std::string>>();
}

void to_json(json& j, const RawPolicySnippet& v) {
  j = {{"element", v.element}, {"chunk_id", v.chunk_id}, {"text", v.text}, {"score", v.score}, {"rank", v.rank}};
}

void from_json(const json& j, RawPolicySnippet& v) {
  v.element = j.at("element").get<ElementRef>();
  v.chunk_id = j.at("chunk_id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.score = j.at("score").get<double>();
  v.rank = j.at("rank").get<std::size_t>();
}

void to_json(json& j, const SecurityPolicy& v) {
  json tags = json::array();
  for (RiskTag t : v.risk_tags) tags.push_back(to_string(t));
  j = {{"policy_id", v.policy_id},
       {"statement", v.statement},
       {"related_elements", v.related_elements},
       {"security_relevance", v.security_relevance},
       {"risk_tags", tags},
       {"source_refs", v.source_refs}};
}

void from_json(const json& j, SecurityPolicy& v) {
  v.policy_id = j.at("policy_id").get<std::string>();
  v.statement = j.at("statement").get<std::string>();
  v.related_elements = j.at("related_elements").get<std::vector<ElementRef>>();
  v.security_relevance = j.at("security_relevance").get<std::string>();
  v.risk_tags.clear();
  for (const auto& t : j.at("risk_tags")) {
    auto tag = parse_risk_tag(t.get<std::string>());
    if (!tag) throw Error(ErrorCode::kInvalidArgument, "unknown risk tag");
    v.risk_tags.push_back(*tag);
  }
  v.source_refs = j.at("source_refs").get<std::vector<std::string>>();
}

void to_json(json& j, const VerificationCapabilities& v) {
  json mods = json::array();
  for (Modality m : v.modalities_available) mods.push_back(to_string(m));
  j = {{"modalities_available", mods},
       {"tools", modality_map_to_json(v.tools)},
       {"budget_note", v.budget_note},
       {"time_allocation", v.time_allocation},
       {"infrastructure_notes", v.infrastructure_notes},
       {"flags", v.flags}};
}

void from_json(const json& j, VerificationCapabilities& v) {
  v.modalities_available.clear();
  for (const auto& m : j.at("modalities_available")) {
    auto mod = parse_modality(m.get<std::string>());
    if (!mod) throw Error(ErrorCode::kInvalidArgument, "unknown modality");
    v.modalities_available.insert(*mod);
  }
  v.tools = modality_map_from_json<std::vector<std::string>>(j.at("tools"));
  v.budget_note = j.at("budget_note").get<std::string>();
  v.time_allocation = j.at("time_allocation").get<std::string>();
  v.infrastructure_notes = j.at("infrastructure_notes").get<std::string>();
  v.flags = j.at("flags").get<std::vector<std::string>>();
}

void to_json(json& j, const TestCase& v) {
  j = {{"case_id", v.case_id},
       {"threat_category", v.threat_category},
       {"test_objective", v.test_objective},
       {"methodology", modality_map_to_json(v.methodology)},
       {"expected_result", modality_map_to_json(v.expected_result)},
       {"evaluation_criteria", modality_map_to_json(v.evaluation_criteria)},
       {"testing_tools", modality_map_to_json(v.testing_tools)},
       {"provenance", v.provenance}};
}

void from_json(const json& j, TestCase& v) {
  v.case_id = j.at("case_id").get<std::string>();
  v.threat_category = j.at("threat_category").get<std::string>();
  v.test_objective = j.at("test_objective").get<std::string>();
  v.methodology = modality_map_from_json<std::string>(j.at("methodology"));
  v.expected_result = modality_map_from_json<std::string>(j.at("expected_result"));
  v.evaluation_criteria = modality_map_from_json<std::string>(j.at("evaluation_criteria"));
  v.testing_tools = modality_map_from_json<std::vector<std::string>>(j.at("testing_tools"));
  v.provenance = j.at("provenance").get<std::string>();
}

void to_json(json& j, const SkipRecord& v) { j = {{"item_id", v.item_id}, {"reason", v.reason}}; }

void from_json(const json& j, SkipRecord& v) {
  v.item_id = j.at("item_id").get<std::string>();
  v.reason = j.at("reason").get<std::string>();
}

void to_json(json& j, const TestPlan& v) {
  j = {{"schema", "hwthreat.test_plan"},
       {"schema_version", 1},
       {"plan_id", v.plan_id},
       {"flow", to_string(v.flow)},
       {"metadata",
        {{"template_versions", v.metadata.template_versions},
         {"model_name", v.metadata.model_name},
         {"source_artifact", v.metadata.source_artifact},
         {"item_ids", v.metadata.item_ids}}},
       {"capability_snapshot", v.capability_snapshot},
       {"summary", {{"cases", v.cases.size()}, {"skipped", v.skipped.size()}}},
       {"flags", v.flags},
       {"cases", v.cases},
       {"skipped", v.skipped}};
}

void from_json(const json& j, TestPlan& v) {
  if (j.value("schema", std::string()) != "hwthreat.test_plan") {
    throw Error(ErrorCode::kInvalidArgument, "not a test plan document");
  }
  v.plan_id = j.at("plan_id").get<std::string>();
  auto flow = parse_flow(j.at("flow").get<std::string>());
  if (!flow) throw Error(ErrorCode::kInvalidArgument, "unknown flow");
  v.flow = *flow;
  const json& m = j.at("metadata");
  v.metadata.template_versions = m.at("template_versions").get<std::map<std::string, std::string>>();
  v.metadata.model_name = m.at("model_name").get<std::string>();
  v.metadata.source_artifact = m.at("source_artifact").get<std::string>();
  v.metadata.item_ids = m.at("item_ids").get<std::vector<std::string>>();
  v.capability_snapshot = j.at("capability_snapshot").get<VerificationCapabilities>();
  v.flags = j.at("flags").get<std::vector<std::string>>();
  v.cases = j.at("cases").get<std::vector<TestCase>>();
  v.skipped = j.at("skipped").get<std::vector<SkipRecord>>();
}

}  // namespace hwthreat
