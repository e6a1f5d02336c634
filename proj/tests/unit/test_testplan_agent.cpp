#include <gtest/gtest.h>

#include "hwthreat/error.hpp"
#include "hwthreat/mock_provider.hpp"
#include "hwthreat/testplan_agent.hpp"
#include "test_support.hpp"

namespace hwthreat {
namespace {

using nlohmann::json;

bool has_violation(const std::vector<std::string>& v, const std::string& fragment) {
  for (const auto& s : v) {
    if (s.find(fragment) != std::string::npos) return true;
  }
  return false;
}

TEST(Capabilities, ParsesModalitiesToolsAndFlags) {
  auto caps = plan::parse_capabilities({
      {"cap-modalities", "", "We have simulation and FPGA emulation.", 0},
      {"cap-tools", "", "simulation: VCS, Verilator; emulation: Zebu; formal: JasperGold; nonsense", 0},
      {"cap-infrastructure", "", "farm", 0},
      {"cap-budget", "", "", 0},
  });
  EXPECT_EQ(caps.modalities_available, (std::set<Modality>{Modality::kEmulation, Modality::kSimulation}));
  EXPECT_EQ(caps.tools[Modality::kSimulation], (std::vector<std::string>{"VCS", "Verilator"}));
  EXPECT_EQ(caps.tools.count(Modality::kFormalVerification), 0u);
  EXPECT_TRUE(has_violation(caps.flags, "JasperGold dropped"));
  EXPECT_TRUE(has_violation(caps.flags, "without a modality"));
  EXPECT_TRUE(has_violation(caps.flags, "budget not provided"));
  EXPECT_TRUE(has_violation(caps.flags, "time not provided"));
}

TEST(ValidateTestCase, ReferenceCaseIsValid) {
  auto tc = testing::reference_case();
  auto caps = testing::reference_capabilities();
  EXPECT_TRUE(plan::validate_test_case(tc, caps).empty());
  std::set<std::string> known = {"pol-reference"};
  EXPECT_TRUE(plan::validate_test_case(tc, caps, &known).empty());
}

TEST(ValidateTestCase, ReportsEachMissingField) {
  auto caps = testing::reference_capabilities();
  TestCase empty;
  empty.case_id = "x";
  auto v = plan::validate_test_case(empty, caps);
  for (const char* field : {"threat_category", "test_objective", "provenance", "methodology", "expected_result",
                            "evaluation_criteria", "testing_tools"}) {
    EXPECT_TRUE(has_violation(v, std::string("x: ") + field + " is missing")) << field;
  }
}

TEST(ValidateTestCase, InventoryAndModalityConsistency) {
  auto caps = testing::reference_capabilities();
  auto tc = testing::reference_case();
  tc.testing_tools[Modality::kSimulation].push_back("Xcelium");
  EXPECT_TRUE(has_violation(plan::validate_test_case(tc, caps), "tool Xcelium is not in the simulation inventory"));

  tc = testing::reference_case();
  tc.expected_result.erase(Modality::kEmulation);
  EXPECT_TRUE(has_violation(plan::validate_test_case(tc, caps), "expected_result covers different modalities"));

  tc = testing::reference_case();
  caps.modalities_available.erase(Modality::kFormalVerification);
  EXPECT_TRUE(
      has_violation(plan::validate_test_case(tc, caps), "modality formal_verification is not available"));

  std::set<std::string> known = {"other"};
  EXPECT_TRUE(has_violation(plan::validate_test_case(testing::reference_case(), testing::reference_capabilities(),
                                                     &known),
                            "not an in-scope item"));
}

json case_json(const std::string& tool) {
  return {{"threat_category", "Access control"},
          {"test_objective", "objective"},
          {"methodology", {{"simulation", "m"}}},
          {"expected_result", {{"simulation", "e"}}},
          {"evaluation_criteria", {{"simulation", "c"}}},
          {"testing_tools", {{"simulation", {tool}}}}};
}

TEST(GenerateTestPlan, RepairsThenSkipsInvalidItems) {
  auto caps = plan::parse_capabilities({{"cap-modalities", "", "simulation", 0},
                                        {"cap-tools", "", "simulation: VCS", 0},
                                        {"cap-infrastructure", "", "x", 0},
                                        {"cap-budget", "", "x", 0},
                                        {"cap-time", "", "x", 0}});
  MockProvider mock = MockProvider::from_json({{"rules", json::array({
      {{"match", {{"contains", {"could not be used", "Item: beta"}}}},
       {"json", {{"cases", {case_json("VCS")}}}}},
      {{"match", {{"contains", "Item: alpha"}}}, {"json", {{"cases", {case_json("VCS"), case_json("VCS")}}}}},
      {{"match", {{"contains", "Item: "}}}, {"json", {{"cases", {case_json("Questa")}}}}},
  })}});
  Gateway g(mock, ProviderConfig{});
  plan::PlanInput in{Flow::kSoftwareExploitable,
                     "policy_list",
                     {{"alpha", "body"}, {"beta", "body"}, {"gamma", "body"}},
                     {}};
  auto p = plan::generate_test_plan(in, caps, g, {});
  ASSERT_EQ(p.cases.size(), 3u);
  EXPECT_EQ(p.cases[0].case_id, "alpha-tc1");
  EXPECT_EQ(p.cases[1].case_id, "alpha-tc2");
  EXPECT_EQ(p.cases[2].provenance, "beta");
  ASSERT_EQ(p.skipped.size(), 1u);
  EXPECT_EQ(p.skipped[0].item_id, "gamma");
  EXPECT_NE(p.skipped[0].reason.find("Questa"), std::string::npos);
  EXPECT_EQ(p.plan_id.rfind("plan-", 0), 0u);
  for (const auto& tc : p.cases) EXPECT_TRUE(plan::validate_test_case(tc, caps).empty());

  auto again = plan::generate_test_plan(in, caps, g, {});
  EXPECT_EQ(again, p);
}

TEST(GenerateTestPlan, EmptyInputGivesExplicitEmptyPlan) {
  MockProvider mock = MockProvider::from_json({{"rules", json::array()}});
  Gateway g(mock, ProviderConfig{});
  auto p = plan::generate_test_plan({Flow::kPhysicalSupplyChain, "threat_list", {}, {}},
                                    testing::reference_capabilities(), g, {});
  EXPECT_TRUE(p.cases.empty());
  EXPECT_TRUE(has_violation(p.flags, "the plan is empty"));
  EXPECT_NE(plan::export_plan(p, plan::ExportFormat::kMarkdown).find("No test cases"), std::string::npos);
}

TEST(ExportPlan, JsonRoundTripAndMarkdownHeadings) {
  TestPlan p;
  p.plan_id = "plan-000000000000";
  p.flow = Flow::kSoftwareExploitable;
  p.cases = {testing::reference_case()};
  p.capability_snapshot = testing::reference_capabilities();
  p.metadata.source_artifact = "policy_list";
  p.metadata.item_ids = {"pol-reference"};
  auto text = plan::export_plan(p, plan::ExportFormat::kStructuredJson);
  EXPECT_EQ(plan::parse_plan(text), p);
  EXPECT_EQ(plan::export_plan(plan::parse_plan(text), plan::ExportFormat::kStructuredJson), text);

  auto md = plan::export_plan(p, plan::ExportFormat::kMarkdown);
  for (const char* h : {"### Threat Category", "### Test Objective", "### Test Methodology", "### Expected Result",
                        "### Evaluation Criteria", "### Testing Tool"}) {
    EXPECT_NE(md.find(h), std::string::npos) << h;
  }
  EXPECT_NE(md.find("- *Simulation:* Modelsim, VCS"), std::string::npos);
  EXPECT_THROW(plan::parse_plan("{}"), Error);
  EXPECT_THROW(plan::parse_plan("not json"), Error);
}

TEST(ExportPlan, FormatNames) {
  EXPECT_EQ(plan::parse_export_format("json"), plan::ExportFormat::kStructuredJson);
  EXPECT_EQ(plan::parse_export_format("markdown"), plan::ExportFormat::kMarkdown);
  EXPECT_EQ(plan::parse_export_format("pdf"), std::nullopt);
}

}  // namespace
}  // namespace hwthreat
