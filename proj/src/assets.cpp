#include "hwthreat/assets.hpp"

#include "hwthreat/error.hpp"

namespace hwthreat::assets {

namespace detail {
const std::map<std::string, std::string>& embedded();
}

namespace {

// Bump a version whenever the template text changes; golden fixtures pin these.
const std::map<std::string, int>& versions() {
  static const std::map<std::string, int> table = {
      {"threat_assessment", 1},     {"query_redundancy", 1},     {"element_extraction", 1},
      {"policy_classification", 1}, {"test_case_synthesis", 1}, {"repair", 1}};
  return table;
}

}  // namespace

const std::string& text(const std::string& name) {
  const auto& table = detail::embedded();
  auto it = table.find(name);
  if (it == table.end()) throw Error(ErrorCode::kNotFound, "unknown asset: " + name);
  return it->second;
}

const PromptTemplate& prompt_template(const std::string& name) {
  static const std::map<std::string, PromptTemplate> templates = [] {
    std::map<std::string, PromptTemplate> out;
    for (const auto& [short_name, version] : versions()) {
      out.emplace(short_name, PromptTemplate::parse(short_name + "@v" + std::to_string(version),
                                                    text("templates/" + short_name + ".txt")));
    }
    return out;
  }();
  auto it = templates.find(name);
  if (it == templates.end()) throw Error(ErrorCode::kNotFound, "unknown prompt template: " + name);
  return it->second;
}

std::map<std::string, std::string> template_versions() {
  std::map<std::string, std::string> out;
  for (const auto& [name, version] : versions()) out[name] = name + "@v" + std::to_string(version);
  return out;
}

}  // namespace hwthreat::assets
