#include "hwthreat/testplan_agent.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "hwthreat/assets.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/policy_agent.hpp"
#include "hwthreat/prompt.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat::plan {

using nlohmann::json;

namespace {

const std::vector<Modality> kAllModalities = {Modality::kFormalVerification, Modality::kEmulation,
                                              Modality::kSimulation, Modality::kPhysicalTesting};

std::vector<std::string> split(std::string_view s, std::string_view seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (seps.find(c) != std::string_view::npos) {
      out.push_back(text::trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(text::trim(cur));
  out.erase(std::remove_if(out.begin(), out.end(), [](const std::string& x) { return x.empty(); }), out.end());
  return out;
}

std::string field_of(const std::string& query_id) {
  return query_id.rfind("cap-", 0) == 0 ? query_id.substr(4) : query_id;
}

void change_phase(SessionWriter& w, Phase to) {
  w.append(EventKind::kPhaseChanged, {{"from", to_string(w.state().phase)}, {"to", to_string(to)}});
}

void require_phase(const SessionState& s, Phase p, std::string_view action) {
  if (s.phase != p) {
    throw Error(ErrorCode::kInvalidPhase,
                std::string(action) + " requires phase " + std::string(to_string(p)) + ", session is in " +
                    std::string(to_string(s.phase)),
                {{"phase", to_string(s.phase)}, {"required", to_string(p)}});
  }
}

bool has_tool(const std::vector<std::string>& inventory, const std::string& tool) {
  std::string t = text::to_lower(text::trim(tool));
  return std::any_of(inventory.begin(), inventory.end(),
                     [&](const std::string& x) { return text::to_lower(x) == t; });
}

std::string modality_list(const VerificationCapabilities& caps) {
  std::string out;
  for (Modality m : caps.modalities_available) out += (out.empty() ? "" : ", ") + std::string(to_string(m));
  return out.empty() ? "(none)" : out;
}

std::string tool_list(const VerificationCapabilities& caps) {
  std::string out;
  for (const auto& [m, tools] : caps.tools) {
    if (tools.empty()) continue;
    std::string names;
    for (const auto& t : tools) names += (names.empty() ? "" : ", ") + t;
    out += (out.empty() ? "" : "; ") + std::string(to_string(m)) + ": " + names;
  }
  return out.empty() ? "none recorded; leave testing_tools lists empty" : out;
}

std::string constraint_list(const VerificationCapabilities& caps) {
  std::string out;
  auto add = [&](std::string_view label, const std::string& v) {
    if (!v.empty()) out += (out.empty() ? "" : "; ") + std::string(label) + ": " + v;
  };
  add("infrastructure", caps.infrastructure_notes);
  add("budget", caps.budget_note);
  add("time", caps.time_allocation);
  return out.empty() ? "none stated" : out;
}

std::string threat_body(const SessionState& s, const ThreatAssessment& t) {
  std::string body = "Threat category: " + t.label + " (" + t.category_id + ")\nAssessment: " + t.rationale;
  auto ev = s.evidence.find(t.category_id);
  if (ev != s.evidence.end() && !ev->second.empty()) {
    body += "\nSupporting knowledge:";
    for (const auto& h : ev->second.hits) body += "\n[" + h.chunk_id + "] " + h.text;
  }
  return body;
}

std::string policy_body(const SecurityPolicy& p) {
  std::string body = "Security policy " + p.policy_id + ": " + p.statement;
  if (!p.security_relevance.empty()) body += "\nSecurity relevance: " + p.security_relevance;
  std::string tags;
  for (RiskTag t : p.risk_tags) tags += (tags.empty() ? "" : ", ") + std::string(to_string(t));
  body += "\nRisks: " + tags;
  std::string els;
  for (const auto& e : p.related_elements) els += (els.empty() ? "" : ", ") + std::string(to_string(e.kind)) + " " + e.norm_key;
  body += "\nDesign elements: " + els;
  return body;
}

// Converts one coerced case object; unknown modality keys become violations.
TestCase to_case(const json& c, const std::string& item_id, std::vector<std::string>& problems,
                 const std::string& where) {
  TestCase tc;
  tc.provenance = item_id;
  tc.threat_category = text::trim(c.value("threat_category", std::string()));
  tc.test_objective = text::trim(c.value("test_objective", std::string()));
  auto text_map = [&](const char* field, std::map<Modality, std::string>& dst) {
    const json entries = c.value(field, json::object());
    for (const auto& [k, v] : entries.items()) {
      auto m = parse_modality(k);
      if (!m) {
        problems.push_back(where + field + ": unknown modality '" + k + "'");
        continue;
      }
      dst[*m] = text::trim(v.get<std::string>());
    }
  };
  text_map("methodology", tc.methodology);
  text_map("expected_result", tc.expected_result);
  text_map("evaluation_criteria", tc.evaluation_criteria);
  const json tool_entries = c.value("testing_tools", json::object());
  for (const auto& [k, v] : tool_entries.items()) {
    auto m = parse_modality(k);
    if (!m) {
      problems.push_back(where + "testing_tools: unknown modality '" + k + "'");
      continue;
    }
    for (const auto& t : v) {
      std::string name = text::trim(t.get<std::string>());
      if (!name.empty()) tc.testing_tools[*m].push_back(name);
    }
    tc.testing_tools.try_emplace(*m);
  }
  return tc;
}

}  // namespace

VerificationCapabilities parse_capabilities(const std::vector<TranscriptEntry>& answers) {
  VerificationCapabilities caps;
  std::map<std::string, std::string> by_field;
  for (const auto& a : answers) by_field[field_of(a.query_id)] = text::trim(a.answer_text);

  const std::string modalities = by_field["modalities"];
  for (Modality m : kAllModalities) {
    static const std::map<Modality, std::string> stems = {{Modality::kFormalVerification, "formal"},
                                                          {Modality::kEmulation, "emulat"},
                                                          {Modality::kSimulation, "simulat"},
                                                          {Modality::kPhysicalTesting, "physical"}};
    if (text::contains_ci(modalities, stems.at(m))) caps.modalities_available.insert(m);
  }
  if (caps.modalities_available.empty()) caps.flags.push_back("no verification modality recognised in the answer");

  const std::string tools = by_field["tools"];
  if (tools.empty()) {
    caps.flags.push_back("tools not provided");
  } else {
    for (const auto& entry : split(tools, ";\n")) {
      auto colon = entry.find(':');
      if (colon == std::string::npos) {
        caps.flags.push_back("tool entry without a modality ignored: " + entry);
        continue;
      }
      auto m = parse_modality(text::trim(entry.substr(0, colon)));
      if (!m) {
        caps.flags.push_back("unknown modality in tool entry ignored: " + entry);
        continue;
      }
      for (const auto& t : split(entry.substr(colon + 1), ",")) {
        if (!caps.modalities_available.count(*m)) {
          caps.flags.push_back("tool " + t + " dropped: " + std::string(to_string(*m)) + " is not available");
          continue;
        }
        if (!has_tool(caps.tools[*m], t)) caps.tools[*m].push_back(t);
      }
    }
  }
  caps.infrastructure_notes = by_field["infrastructure"];
  caps.budget_note = by_field["budget"];
  caps.time_allocation = by_field["time"];
  if (caps.infrastructure_notes.empty()) caps.flags.push_back("infrastructure not provided");
  if (caps.budget_note.empty()) caps.flags.push_back("budget not provided");
  if (caps.time_allocation.empty()) caps.flags.push_back("time not provided");
  return caps;
}

std::optional<Query> next_capability_query(SessionWriter& w, const PlanOptions& opts) {
  require_phase(w.state(), Phase::kCapabilityGathering, "capability gathering");
  if (!w.state().capability_bank.initialized) {
    w.append(EventKind::kBankUpdated,
             {{"bank", "capability"}, {"action", "init"}, {"queries", opts.capability_queries}});
  }
  return present_next(w, BankId::kCapability);
}

void submit_capability_answer(SessionWriter& w, const std::string& query_id, const std::string& answer) {
  require_phase(w.state(), Phase::kCapabilityGathering, "capability gathering");
  record_answer(w, BankId::kCapability, query_id, answer, true, false);
}

VerificationCapabilities gather_capabilities(SessionWriter& w, AnswerSource& source, const PlanOptions& opts) {
  require_phase(w.state(), Phase::kCapabilityGathering, "capability gathering");
  for (;;) {
    std::optional<Query> q = pending_query(w.state(), BankId::kCapability);
    if (!q) q = next_capability_query(w, opts);
    if (!q) break;
    std::optional<std::string> a = source.answer(*q);
    if (!a) {
      throw Error(ErrorCode::kMissingAnswer, "no answer available for query " + q->query_id,
                  {{"query_id", q->query_id}, {"query", q->text}});
    }
    submit_capability_answer(w, q->query_id, *a);
  }
  return parse_capabilities(w.state().capability_transcript);
}

std::vector<std::string> validate_test_case(const TestCase& tc, const VerificationCapabilities& caps,
                                            const std::set<std::string>* known_items) {
  std::vector<std::string> v;
  const std::string id = tc.case_id.empty() ? std::string("case") : tc.case_id;
  auto need_text = [&](const std::string& value, const char* field) {
    if (text::is_blank(value)) v.push_back(id + ": " + field + " is missing");
  };
  need_text(tc.threat_category, "threat_category");
  need_text(tc.test_objective, "test_objective");
  need_text(tc.provenance, "provenance");
  if (known_items && !tc.provenance.empty() && !known_items->count(tc.provenance)) {
    v.push_back(id + ": provenance " + tc.provenance + " is not an in-scope item");
  }

  auto need_map = [&](const std::map<Modality, std::string>& m, const char* field) {
    if (m.empty()) v.push_back(id + ": " + field + " is missing");
    for (const auto& [mod, text] : m) {
      if (text::is_blank(text)) v.push_back(id + ": " + field + "." + std::string(to_string(mod)) + " is empty");
    }
  };
  need_map(tc.methodology, "methodology");
  need_map(tc.expected_result, "expected_result");
  need_map(tc.evaluation_criteria, "evaluation_criteria");
  if (tc.testing_tools.empty()) v.push_back(id + ": testing_tools is missing");

  std::set<Modality> keys;
  for (const auto& [m, x] : tc.methodology) keys.insert(m);
  auto same_keys = [&](const auto& m, const char* field) {
    std::set<Modality> k;
    for (const auto& [mod, x] : m) k.insert(mod);
    if (!m.empty() && k != keys) v.push_back(id + ": " + field + " covers different modalities than methodology");
  };
  same_keys(tc.expected_result, "expected_result");
  same_keys(tc.evaluation_criteria, "evaluation_criteria");
  same_keys(tc.testing_tools, "testing_tools");

  for (Modality m : keys) {
    if (!caps.modalities_available.count(m)) {
      v.push_back(id + ": modality " + std::string(to_string(m)) + " is not available");
    }
  }
  for (const auto& [m, tools] : tc.testing_tools) {
    auto inv = caps.tools.find(m);
    for (const auto& t : tools) {
      if (inv == caps.tools.end() || !has_tool(inv->second, t)) {
        v.push_back(id + ": tool " + t + " is not in the " + std::string(to_string(m)) + " inventory");
      }
    }
  }
  return v;
}

PlanInput plan_input(const SessionState& s) {
  PlanInput in;
  in.flow = s.flow;
  if (s.flow == Flow::kPhysicalSupplyChain) {
    in.source_artifact = "threat_list";
    for (const auto& [id, t] : s.threats) {
      if (t.status == ThreatStatus::kRetained) {
        in.items.push_back({id, threat_body(s, t)});
      } else if (t.status == ThreatStatus::kCandidate) {
        in.upstream_skips.push_back({id, t.flag.empty() ? "threat was never decided" : t.flag});
      }
    }
  } else {
    in.source_artifact = "policy_list";
    for (const auto& p : policy::session_policies(s)) in.items.push_back({p.policy_id, policy_body(p)});
  }
  return in;
}

TestPlan generate_test_plan(const PlanInput& input, const VerificationCapabilities& caps, Gateway& gateway,
                            const PlanOptions& opts) {
  const PromptTemplate& tmpl = assets::prompt_template("test_case_synthesis");
  const std::string guidance = opts.guidance.empty() ? assets::text("methodology_guidance.md") : opts.guidance;
  std::set<std::string> known;
  for (const auto& it : input.items) known.insert(it.item_id);

  TestPlan plan;
  plan.flow = input.flow;
  plan.capability_snapshot = caps;
  auto versions = assets::template_versions();
  plan.metadata.template_versions = {{"test_case_synthesis", versions.at("test_case_synthesis")},
                                     {"repair", versions.at("repair")}};
  plan.metadata.model_name = gateway.model_name();
  plan.metadata.source_artifact = input.source_artifact;
  plan.skipped = input.upstream_skips;

  for (const auto& item : input.items) {
    plan.metadata.item_ids.push_back(item.item_id);
    Bindings b{{"item_id", item.item_id},
               {"item_kind", input.flow == Flow::kPhysicalSupplyChain ? "threat" : "security policy"},
               {"item_body", item.body},
               {"modalities", modality_list(caps)},
               {"tools", tool_list(caps)},
               {"constraints", constraint_list(caps)},
               {"guidance", guidance},
               {"schema_hint", std::string(schema_hint(Schema::kTestCases))}};
    std::string prompt = render_prompt(tmpl, b);

    auto build = [&](const json& value, std::vector<std::string>& problems) {
      std::vector<TestCase> cases;
      const json& list = value.at("cases");
      if (list.empty()) problems.push_back("at least one test case is required");
      for (std::size_t i = 0; i < list.size(); ++i) {
        TestCase tc = to_case(list[i], item.item_id, problems, "cases[" + std::to_string(i) + "].");
        tc.case_id = item.item_id + "-tc" + std::to_string(i + 1);
        for (auto& msg : validate_test_case(tc, caps, &known)) problems.push_back(std::move(msg));
        cases.push_back(std::move(tc));
      }
      return cases;
    };
    SemanticCheck check = [&](const json& value) {
      std::vector<std::string> problems;
      build(value, problems);
      return problems;
    };
    try {
      json value = gateway.structured(prompt, Schema::kTestCases, check);
      std::vector<std::string> unused;
      for (auto& tc : build(value, unused)) plan.cases.push_back(std::move(tc));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSchemaViolation && e.code() != ErrorCode::kNoStructuredContent) throw;
      spdlog::warn("test plan: item {} skipped: {}", item.item_id, e.what());
      std::string reason = e.what();
      if (e.details().contains("violations")) {
        for (const auto& viol : e.details()["violations"]) reason += "; " + viol.get<std::string>();
      }
      plan.skipped.push_back({item.item_id, reason});
    }
  }

  std::stable_sort(plan.cases.begin(), plan.cases.end(),
                   [](const TestCase& a, const TestCase& b) { return a.provenance < b.provenance; });
  std::sort(plan.skipped.begin(), plan.skipped.end(),
            [](const SkipRecord& a, const SkipRecord& b) { return a.item_id < b.item_id; });
  if (input.items.empty()) plan.flags.push_back("no in-scope items; the plan is empty");
  plan.flags.insert(plan.flags.end(), caps.flags.begin(), caps.flags.end());

  json identity = {{"flow", to_string(plan.flow)}, {"cases", plan.cases}, {"skipped", plan.skipped},
                   {"items", plan.metadata.item_ids}};
  plan.plan_id = "plan-" + text::sha256_hex(identity.dump()).substr(0, 12);
  return plan;
}

TestPlan run_plan(SessionWriter& w, Gateway& gateway, const PlanOptions& opts) {
  const SessionState& s = w.state();
  if (s.phase == Phase::kFinalized && s.plan) return *s.plan;
  if (s.phase == Phase::kCapabilityGathering) {
    const QueryBank& bank = s.capability_bank;
    if (!bank.initialized || bank.presented || bank.count(QueryStatus::kActive) > 0) {
      throw Error(ErrorCode::kPreconditionFailed, "the capability interview is not complete");
    }
    change_phase(w, Phase::kPlanGeneration);
  }
  require_phase(w.state(), Phase::kPlanGeneration, "plan generation");
  if (!w.state().plan) {
    VerificationCapabilities caps = parse_capabilities(w.state().capability_transcript);
    TestPlan plan = generate_test_plan(plan_input(w.state()), caps, gateway, opts);
    w.append(EventKind::kPlanEmitted, {{"plan", plan}});
  }
  TestPlan plan = *w.state().plan;
  change_phase(w, Phase::kFinalized);
  return plan;
}

std::optional<ExportFormat> parse_export_format(std::string_view s) {
  if (s == "json" || s == "structured" || s == "structured_json") return ExportFormat::kStructuredJson;
  if (s == "markdown" || s == "md") return ExportFormat::kMarkdown;
  return std::nullopt;
}

std::string export_plan(const TestPlan& plan, ExportFormat format) {
  if (format == ExportFormat::kStructuredJson) return json(plan).dump(2) + "\n";

  std::string md = "# Security Test Plan\n\n";
  md += "- Plan: " + plan.plan_id + "\n";
  md += "- Flow: " + std::string(to_string(plan.flow)) + "\n";
  md += "- Source: " + plan.metadata.source_artifact + "\n";
  md += "- Test cases: " + std::to_string(plan.cases.size()) + "\n";
  md += "- Skipped items: " + std::to_string(plan.skipped.size()) + "\n\n";
  if (plan.cases.empty()) md += "No test cases were generated.\n\n";

  auto per_modality = [](const auto& m, auto render) {
    std::string out;
    for (const auto& [mod, v] : m) out += "- *" + std::string(display_name(mod)) + ":* " + render(v) + "\n";
    return out.empty() ? std::string("- none\n") : out;
  };
  auto plain = [](const std::string& s) { return s; };
  auto tools = [](const std::vector<std::string>& t) {
    std::string out;
    for (const auto& x : t) out += (out.empty() ? "" : ", ") + x;
    return out.empty() ? std::string("none recorded") : out;
  };

  for (std::size_t i = 0; i < plan.cases.size(); ++i) {
    const TestCase& tc = plan.cases[i];
    md += "## Test Case " + std::to_string(i + 1) + ": " + tc.case_id + "\n\n";
    md += "Provenance: " + tc.provenance + "\n\n";
    md += "### Threat Category\n\n" + tc.threat_category + "\n\n";
    md += "### Test Objective\n\n" + tc.test_objective + "\n\n";
    md += "### Test Methodology\n\n" + per_modality(tc.methodology, plain) + "\n";
    md += "### Expected Result\n\n" + per_modality(tc.expected_result, plain) + "\n";
    md += "### Evaluation Criteria\n\n" + per_modality(tc.evaluation_criteria, plain) + "\n";
    md += "### Testing Tool\n\n" + per_modality(tc.testing_tools, tools) + "\n";
  }
  if (!plan.skipped.empty()) {
    md += "## Skipped Items\n\n";
    for (const auto& s : plan.skipped) md += "- " + s.item_id + ": " + s.reason + "\n";
    md += "\n";
  }
  if (!plan.flags.empty()) {
    md += "## Notes\n\n";
    for (const auto& f : plan.flags) md += "- " + f + "\n";
    md += "\n";
  }
  md.pop_back();
  return md;
}

TestPlan parse_plan(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "test plan is not valid JSON");
  try {
    return j.get<TestPlan>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed test plan: ") + e.what());
  }
}

}  // namespace hwthreat::plan
