#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/gateway.hpp"
#include "hwthreat/knowledge.hpp"
#include "hwthreat/session.hpp"

// Software-exploitable policy mining: design elements from the design
// specification, matching passages from the ISA manual, classified policies.
namespace hwthreat::policy {

enum class ExtractionMode { kAuto, kExhaustive, kRetrieval };
std::string_view to_string(ExtractionMode m);
std::optional<ExtractionMode> parse_extraction_mode(std::string_view s);

struct Flow2Options {
  ExtractionMode mode = ExtractionMode::kAuto;
  // kAuto scans every specification chunk up to this many, else retrieves.
  std::size_t exhaustive_max_chunks = 64;
  std::size_t chunks_per_prompt = 4;
  std::size_t k_elements = 8;
  std::size_t k_isa = 8;
  // Keep only ISA passages that mention the element by name.
  bool require_mention = true;
};

// Case-insensitive whole-word occurrence of `name` in `text`.
bool mentions(std::string_view text, std::string_view name);

struct ElementExtraction {
  std::vector<DesignElement> elements;
  std::vector<std::string> warnings;
};

// Step 1. Names the model returns are kept only when they occur in the
// excerpts they were drawn from. Throws kEmptySpecIndex.
ElementExtraction extract_design_elements(const KnowledgeBase& kb, EmbeddingProvider& embedder, Gateway& gateway,
                                          const Flow2Options& opts);

// Merges duplicates by (kind, normalized name) and sorts. Idempotent.
std::vector<DesignElement> dedup_elements(std::vector<DesignElement> elements);

struct SnippetExtraction {
  std::vector<RawPolicySnippet> snippets;
  std::vector<std::string> warnings;
};

// Step 2. Throws kPreconditionFailed for an empty element list and
// kEmptyIsaIndex when no ISA manual is indexed.
SnippetExtraction extract_isa_policies(const KnowledgeBase& kb, EmbeddingProvider& embedder,
                                       const std::vector<DesignElement>& elements, const Flow2Options& opts);

// Step 3 for one element. Failures are reported in the batch, not thrown,
// except for provider errors.
PolicyBatch classify_batch(std::size_t batch_no, const DesignElement& element,
                           const std::vector<RawPolicySnippet>& snippets, Gateway& gateway);

// Batches in element order: one per element that has snippets.
std::vector<std::pair<DesignElement, std::vector<RawPolicySnippet>>> plan_batches(
    const std::vector<DesignElement>& elements, const std::vector<RawPolicySnippet>& snippets);

// Step 3 over all snippets. Throws kPreconditionFailed for an empty input.
std::vector<PolicyBatch> classify_policies(const std::vector<DesignElement>& elements,
                                           const std::vector<RawPolicySnippet>& snippets, Gateway& gateway);

// Union of duplicates by policy_id, sorted by policy_id. Idempotent.
std::vector<SecurityPolicy> merge_policies(std::vector<SecurityPolicy> policies);

// Runs the three steps on the session, resuming after the last recorded
// step, and ends in capability_gathering or, when nothing usable came out,
// degraded.
void run_flow2(SessionWriter& writer, Gateway& gateway, const KnowledgeBase& kb, EmbeddingProvider& embedder,
               const Flow2Options& opts);

std::vector<SecurityPolicy> session_policies(const SessionState& state);

// The policy_list artifact.
nlohmann::json policy_list_document(const SessionState& state);

}  // namespace hwthreat::policy
