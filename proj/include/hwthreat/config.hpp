#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/corpus.hpp"
#include "hwthreat/gateway.hpp"
#include "hwthreat/policy_agent.hpp"

namespace hwthreat {

// Workspace configuration (config.json). Every field has a default; relative
// file paths are resolved against the workspace directory.
struct EngineConfig {
  std::string provider_kind = "mock";  // mock | openai
  std::string mock_script;             // mock rules file
  ProviderConfig provider;

  std::string embedding_kind = "hashing";  // hashing | openai
  std::size_t embedding_dim = 256;
  std::string embedding_model = "text-embedding-3-small";

  ChunkingParams chunking;
  std::size_t k = 8;

  bool reassess_retained = true;
  std::size_t answers_per_round = 1;
  std::string query_bank_file;
  std::string catalog_file;

  policy::Flow2Options flow2;

  std::string guidance_file;
  std::string capability_queries_file;
};

EngineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const EngineConfig& c);

// Reads `path`; a missing file yields the defaults.
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace hwthreat
