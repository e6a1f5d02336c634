#include "hwthreat/structured.hpp"

#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {

using nlohmann::json;

std::string_view to_string(Schema schema) {
  switch (schema) {
    case Schema::kThreatVerdict: return "threat_verdict";
    case Schema::kQueryRedundancy: return "query_redundancy";
    case Schema::kElementNames: return "element_names";
    case Schema::kPolicyRecords: return "policy_records";
    case Schema::kTestCases: return "test_cases";
  }
  return "unknown";
}

std::string_view schema_hint(Schema schema) {
  switch (schema) {
    case Schema::kThreatVerdict:
      return R"({"relevant": <true|false>, "rationale": "<why>"})";
    case Schema::kQueryRedundancy:
      return R"({"remove": [{"query_id": "<id>", "reason": "<why>"}]})";
    case Schema::kElementNames:
      return R"({"names": ["<name as written in the excerpts>"]})";
    case Schema::kPolicyRecords:
      return R"({"policies": [{"statement": "<one testable sentence>", "relevance": "<security relevance>", "risk_tags": ["<tag>"], "sources": ["<chunk id>"]}]})";
    case Schema::kTestCases:
      return R"({"cases": [{"threat_category": "<text>", "test_objective": "<text>", "methodology": {"<modality>": "<text>"}, "expected_result": {"<modality>": "<text>"}, "evaluation_criteria": {"<modality>": "<text>"}, "testing_tools": {"<modality>": ["<tool>"]}}]})";
  }
  return "{}";
}

std::optional<json> extract_first_object(std::string_view text) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        json parsed = json::parse(text.substr(open, i - open + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
        break;
      }
    }
  }
  return std::nullopt;
}

namespace {

class Checker {
 public:
  std::vector<std::string> violations;

  void fail(const std::string& path, const std::string& what) { violations.push_back(path + ": " + what); }

  std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return fail(path + key, "required field missing"), std::nullopt;
    const json& v = obj[key];
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
      std::string s = text::to_lower(text::trim(v.get<std::string>()));
      if (s == "true" || s == "yes") return true;
      if (s == "false" || s == "no") return false;
    }
    fail(path + key, "expected boolean");
    return std::nullopt;
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path,
                                    bool required, bool non_empty) {
    if (!obj.contains(key) || obj[key].is_null()) {
      if (required) fail(path + key, "required field missing");
      return required ? std::nullopt : std::optional<std::string>("");
    }
    if (!obj[key].is_string()) return fail(path + key, "expected string"), std::nullopt;
    std::string s = obj[key].get<std::string>();
    if (non_empty && text::is_blank(s)) return fail(path + key, "must not be empty"), std::nullopt;
    return s;
  }

  // Array of strings; a bare string is split on commas.
  std::optional<std::vector<std::string>> string_list(const json& v, const std::string& path) {
    std::vector<std::string> out;
    if (v.is_string()) {
      std::string s = v.get<std::string>();
      std::size_t b = 0;
      while (b <= s.size()) {
        std::size_t e = s.find(',', b);
        if (e == std::string::npos) e = s.size();
        std::string item = text::trim(std::string_view(s).substr(b, e - b));
        if (!item.empty()) out.push_back(item);
        b = e + 1;
      }
      return out;
    }
    if (!v.is_array()) return fail(path, "expected array of strings"), std::nullopt;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) return fail(path + "[" + std::to_string(i) + "]", "expected string"), std::nullopt;
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  // Object of modality -> text. Missing is returned as an empty object; field
  // completeness is a test-case validation concern.
  json text_map(const json& obj, const std::string& key, const std::string& path) {
    json out = json::object();
    if (!obj.contains(key) || obj[key].is_null()) return out;
    if (!obj[key].is_object()) return fail(path + key, "expected object of modality -> text"), out;
    for (const auto& [k, v] : obj[key].items()) {
      if (!v.is_string()) {
        fail(path + key + "." + k, "expected string");
        continue;
      }
      out[k] = v;
    }
    return out;
  }
};

json check_threat_verdict(const json& v, Checker& c) {
  auto relevant = c.boolean(v, "relevant", "");
  auto rationale = c.string(v, "rationale", "", true, true);
  if (!relevant || !rationale) return nullptr;
  return {{"relevant", *relevant}, {"rationale", *rationale}};
}

json check_query_redundancy(const json& v, Checker& c) {
  if (!v.contains("remove")) return c.fail("remove", "required field missing"), nullptr;
  if (!v["remove"].is_array()) return c.fail("remove", "expected array"), nullptr;
  json out = json::array();
  for (std::size_t i = 0; i < v["remove"].size(); ++i) {
    const json& item = v["remove"][i];
    std::string path = "remove[" + std::to_string(i) + "].";
    if (item.is_string()) {
      out.push_back({{"query_id", item.get<std::string>()}, {"reason", ""}});
      continue;
    }
    if (!item.is_object()) {
      c.fail("remove[" + std::to_string(i) + "]", "expected object or query id string");
      continue;
    }
    auto id = c.string(item, "query_id", path, true, true);
    auto reason = c.string(item, "reason", path, false, false);
    if (id && reason) out.push_back({{"query_id", *id}, {"reason", *reason}});
  }
  return {{"remove", out}};
}

json check_element_names(const json& v, Checker& c) {
  if (!v.contains("names")) return c.fail("names", "required field missing"), nullptr;
  auto names = c.string_list(v["names"], "names");
  if (!names) return nullptr;
  return {{"names", *names}};
}

json check_policy_records(const json& v, Checker& c) {
  if (!v.contains("policies")) return c.fail("policies", "required field missing"), nullptr;
  if (!v["policies"].is_array()) return c.fail("policies", "expected array"), nullptr;
  json out = json::array();
  for (std::size_t i = 0; i < v["policies"].size(); ++i) {
    const json& item = v["policies"][i];
    std::string path = "policies[" + std::to_string(i) + "].";
    if (!item.is_object()) {
      c.fail("policies[" + std::to_string(i) + "]", "expected object");
      continue;
    }
    auto statement = c.string(item, "statement", path, true, true);
    auto relevance = c.string(item, "relevance", path, false, false);
    std::optional<std::vector<std::string>> tags;
    if (!item.contains("risk_tags")) c.fail(path + "risk_tags", "required field missing");
    else tags = c.string_list(item["risk_tags"], path + "risk_tags");
    std::vector<std::string> sources;
    if (item.contains("sources") && !item["sources"].is_null()) {
      auto s = c.string_list(item["sources"], path + "sources");
      if (s) sources = *s;
    }
    if (statement && relevance && tags) {
      out.push_back({{"statement", *statement},
                     {"relevance", *relevance},
                     {"risk_tags", *tags},
                     {"sources", sources}});
    }
  }
  return {{"policies", out}};
}

json check_test_cases(const json& v, Checker& c) {
  if (!v.contains("cases")) return c.fail("cases", "required field missing"), nullptr;
  if (!v["cases"].is_array()) return c.fail("cases", "expected array"), nullptr;
  json out = json::array();
  for (std::size_t i = 0; i < v["cases"].size(); ++i) {
    const json& item = v["cases"][i];
    std::string path = "cases[" + std::to_string(i) + "].";
    if (!item.is_object()) {
      c.fail("cases[" + std::to_string(i) + "]", "expected object");
      continue;
    }
    json tc;
    tc["threat_category"] = c.string(item, "threat_category", path, false, false).value_or("");
    tc["test_objective"] = c.string(item, "test_objective", path, false, false).value_or("");
    tc["methodology"] = c.text_map(item, "methodology", path);
    tc["expected_result"] = c.text_map(item, "expected_result", path);
    tc["evaluation_criteria"] = c.text_map(item, "evaluation_criteria", path);
    json tools = json::object();
    if (item.contains("testing_tools") && !item["testing_tools"].is_null()) {
      if (!item["testing_tools"].is_object()) {
        c.fail(path + "testing_tools", "expected object of modality -> tools");
      } else {
        for (const auto& [k, t] : item["testing_tools"].items()) {
          if (auto list = c.string_list(t, path + "testing_tools." + k)) tools[k] = *list;
        }
      }
    }
    tc["testing_tools"] = tools;
    out.push_back(tc);
  }
  return {{"cases", out}};
}

}  // namespace

json validate_schema(const json& value, Schema schema) {
  Checker c;
  json out;
  if (!value.is_object()) {
    c.fail("$", "expected object");
  } else {
    switch (schema) {
      case Schema::kThreatVerdict: out = check_threat_verdict(value, c); break;
      case Schema::kQueryRedundancy: out = check_query_redundancy(value, c); break;
      case Schema::kElementNames: out = check_element_names(value, c); break;
      case Schema::kPolicyRecords: out = check_policy_records(value, c); break;
      case Schema::kTestCases: out = check_test_cases(value, c); break;
    }
  }
  if (!c.violations.empty()) {
    throw Error(ErrorCode::kSchemaViolation,
                std::string("response does not match the ") + std::string(to_string(schema)) + " schema",
                {{"schema", to_string(schema)}, {"violations", c.violations}});
  }
  return out;
}

json parse_structured(std::string_view response_text, Schema schema) {
  auto obj = extract_first_object(response_text);
  if (!obj) {
    throw Error(ErrorCode::kNoStructuredContent, "response contains no JSON object",
                {{"schema", to_string(schema)}});
  }
  return validate_schema(*obj, schema);
}

}  // namespace hwthreat
