#include "hwthreat/mock_provider.hpp"

#include <algorithm>
#include <fstream>

#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {

using nlohmann::json;

MockProvider::MockProvider(std::vector<MockRule> rules, std::string model)
    : rules_(std::move(rules)), uses_(rules_.size(), 0), model_(std::move(model)) {}

MockProvider MockProvider::from_json(const json& script) {
  if (!script.is_object() || !script.contains("rules") || !script["rules"].is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "mock script needs a \"rules\" array");
  }
  std::vector<MockRule> rules;
  for (const json& r : script["rules"]) {
    MockRule rule;
    const json& m = r.at("match");
    if (m.contains("sha256")) rule.prompt_sha256 = m["sha256"].get<std::string>();
    if (m.contains("prompt")) rule.prompt_sha256 = text::sha256_hex(m["prompt"].get<std::string>());
    if (m.contains("contains")) {
      if (m["contains"].is_string()) rule.contains.push_back(m["contains"].get<std::string>());
      else rule.contains = m["contains"].get<std::vector<std::string>>();
    }
    if (m.contains("ordinal")) rule.ordinal = m["ordinal"].get<std::size_t>();
    int kinds = rule.prompt_sha256.has_value() + !rule.contains.empty() + rule.ordinal.has_value();
    if (kinds != 1) {
      throw Error(ErrorCode::kInvalidArgument, "mock rule must have exactly one matcher", {{"rule", r}});
    }
    if (r.contains("response")) rule.response = r["response"].get<std::string>();
    else if (r.contains("json")) rule.response = r["json"].dump();
    else if (r.contains("error")) {
      const json& e = r["error"];
      rule.error_message = e.value("message", std::string("scripted failure"));
      rule.error_retryable = e.value("retryable", true);
      rule.error_timeout = e.value("timeout", false);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "mock rule needs response, json or error", {{"rule", r}});
    }
    if (r.contains("times")) rule.max_uses = r["times"].get<std::size_t>();
    rules.push_back(std::move(rule));
  }
  return MockProvider(std::move(rules), script.value("model", std::string("mock")));
}

MockProvider MockProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "mock script not found: " + path.string());
  json script = json::parse(in, nullptr, false);
  if (script.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "mock script is not valid JSON");
  return from_json(script);
}

std::string MockProvider::complete(std::string_view prompt) {
  std::lock_guard lock(mu_);
  const std::size_t call = ++calls_;
  std::optional<std::string> digest;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const MockRule& r = rules_[i];
    if (r.max_uses && uses_[i] >= *r.max_uses) continue;
    bool hit = false;
    if (r.ordinal) {
      hit = *r.ordinal == call;
    } else if (r.prompt_sha256) {
      if (!digest) digest = text::sha256_hex(prompt);
      hit = *digest == *r.prompt_sha256;
    } else {
      hit = std::all_of(r.contains.begin(), r.contains.end(),
                        [&](const std::string& s) { return prompt.find(s) != std::string_view::npos; });
    }
    if (!hit) continue;
    ++uses_[i];
    if (r.error_message) {
      if (r.error_timeout) throw Error(ErrorCode::kTimeout, *r.error_message);
      throw provider_error(*r.error_message, r.error_retryable);
    }
    return r.response;
  }
  if (!digest) digest = text::sha256_hex(prompt);
  throw Error(ErrorCode::kUnscriptedPrompt, "no mock rule matches the prompt",
              {{"call", call}, {"prompt_sha256", *digest}, {"prompt_head", std::string(prompt.substr(0, 160))}});
}

std::size_t MockProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace hwthreat
