#pragma once

#include <map>
#include <string>

#include "hwthreat/prompt.hpp"

// Built-in configuration compiled from the assets/ directory.
namespace hwthreat::assets {

// Raw asset text by file name ("query_bank.json", "templates/repair.txt", ...).
const std::string& text(const std::string& name);

// Prompt template by short name ("threat_assessment", "repair", ...), with a
// versioned template_id such as "threat_assessment@v1".
const PromptTemplate& prompt_template(const std::string& name);

// template_id of every shipped template, keyed by short name.
std::map<std::string, std::string> template_versions();

}  // namespace hwthreat::assets
