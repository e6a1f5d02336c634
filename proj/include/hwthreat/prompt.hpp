#pragma once

#include <map>
#include <set>
#include <string>

namespace hwthreat {

// A template body with `{name}` placeholders, where name is [A-Za-z_][A-Za-z0-9_]*.
// Braces around anything else (JSON examples, say) are literal text.
struct PromptTemplate {
  std::string template_id;  // "<name>@v<version>"
  std::string body;
  std::set<std::string> required_bindings;

  // Scans body for placeholders and fills required_bindings.
  static PromptTemplate parse(std::string template_id, std::string body);
};

using Bindings = std::map<std::string, std::string>;

// Single pass substitution; substituted values are never rescanned.
// Throws kMissingBinding, and in strict mode kUnknownPlaceholder for bindings
// the template does not use.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings, bool strict = true);

}  // namespace hwthreat
