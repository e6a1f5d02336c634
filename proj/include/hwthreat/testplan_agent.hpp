#pragma once

#include <set>
#include <string>
#include <vector>

#include "hwthreat/gateway.hpp"
#include "hwthreat/interview.hpp"
#include "hwthreat/session.hpp"

// Test-plan generation for retained threats or mined policies.
namespace hwthreat::plan {

struct PlanOptions {
  std::string guidance;  // empty: the shipped methodology guidance
  std::vector<Query> capability_queries = default_capability_queries();
};

// Builds the capability inventory from capability-interview answers.
// Query ids name their field: cap-modalities, cap-tools, cap-infrastructure,
// cap-budget, cap-time.
VerificationCapabilities parse_capabilities(const std::vector<TranscriptEntry>& answers);

// Presents the next capability query (initialising the bank on first use);
// nullopt once every query was answered. Requires capability_gathering.
std::optional<Query> next_capability_query(SessionWriter& writer, const PlanOptions& opts);
// Blank answers are accepted for optional queries and flagged.
void submit_capability_answer(SessionWriter& writer, const std::string& query_id, const std::string& answer);

// Runs the capability interview to completion with `source`.
VerificationCapabilities gather_capabilities(SessionWriter& writer, AnswerSource& source, const PlanOptions& opts);

// Every field required by the plan schema that is missing or inconsistent
// with the inventory, one message per problem. Empty means valid.
std::vector<std::string> validate_test_case(const TestCase& tc, const VerificationCapabilities& caps,
                                            const std::set<std::string>* known_items = nullptr);

struct PlanItem {
  std::string item_id;  // category_id or policy_id
  std::string body;
};

struct PlanInput {
  Flow flow = Flow::kPhysicalSupplyChain;
  std::string source_artifact;
  std::vector<PlanItem> items;
  std::vector<SkipRecord> upstream_skips;  // items excluded before synthesis
};

// Retained threats (flagged candidates become skips) or all mined policies.
PlanInput plan_input(const SessionState& state);

TestPlan generate_test_plan(const PlanInput& input, const VerificationCapabilities& caps, Gateway& gateway,
                            const PlanOptions& opts);

// capability_gathering -> plan_generation -> finalized, resuming where the
// session stopped. The capability interview must be complete.
TestPlan run_plan(SessionWriter& writer, Gateway& gateway, const PlanOptions& opts);

enum class ExportFormat { kStructuredJson, kMarkdown };
std::optional<ExportFormat> parse_export_format(std::string_view s);

std::string export_plan(const TestPlan& plan, ExportFormat format);
TestPlan parse_plan(std::string_view json_text);

}  // namespace hwthreat::plan
