#include "hwthreat/prompt.hpp"

#include <cctype>
#include <optional>

#include "hwthreat/error.hpp"

namespace hwthreat {

namespace {

// If a placeholder starts at body[pos] ('{'), returns its name.
std::optional<std::string> placeholder_at(const std::string& body, std::size_t pos) {
  std::size_t i = pos + 1;
  if (i >= body.size()) return std::nullopt;
  auto c0 = static_cast<unsigned char>(body[i]);
  if (!(std::isalpha(c0) || c0 == '_')) return std::nullopt;
  while (i < body.size() && (std::isalnum(static_cast<unsigned char>(body[i])) || body[i] == '_')) ++i;
  if (i >= body.size() || body[i] != '}') return std::nullopt;
  return body.substr(pos + 1, i - pos - 1);
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string template_id, std::string body) {
  PromptTemplate t{std::move(template_id), std::move(body), {}};
  for (std::size_t p = t.body.find('{'); p != std::string::npos; p = t.body.find('{', p + 1)) {
    if (auto name = placeholder_at(t.body, p)) t.required_bindings.insert(*name);
  }
  return t;
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings, bool strict) {
  for (const auto& name : tmpl.required_bindings) {
    if (!bindings.count(name)) {
      throw Error(ErrorCode::kMissingBinding, "missing binding: " + name,
                  {{"name", name}, {"template_id", tmpl.template_id}});
    }
  }
  if (strict) {
    for (const auto& [name, value] : bindings) {
      if (!tmpl.required_bindings.count(name)) {
        throw Error(ErrorCode::kUnknownPlaceholder, "template has no placeholder named " + name,
                    {{"name", name}, {"template_id", tmpl.template_id}});
      }
    }
  }
  std::string out;
  out.reserve(tmpl.body.size());
  std::size_t p = 0;
  while (p < tmpl.body.size()) {
    if (tmpl.body[p] == '{') {
      if (auto name = placeholder_at(tmpl.body, p)) {
        out += bindings.at(*name);
        p += name->size() + 2;
        continue;
      }
    }
    out.push_back(tmpl.body[p++]);
  }
  return out;
}

}  // namespace hwthreat
