#include "hwthreat/config.hpp"

#include <fstream>

#include "hwthreat/error.hpp"

namespace hwthreat {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& section, const char* key, T& dst) {
  if (section.contains(key) && !section[key].is_null()) dst = section[key].get<T>();
}

}  // namespace

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "configuration must be a JSON object");
  try {
    json p = j.value("provider", json::object());
    read(p, "kind", c.provider_kind);
    read(p, "mock_script", c.mock_script);
    read(p, "endpoint", c.provider.endpoint);
    read(p, "model", c.provider.model_name);
    read(p, "api_key_ref", c.provider.api_key_ref);
    if (p.contains("timeout_ms")) c.provider.timeout = std::chrono::milliseconds(p["timeout_ms"].get<long>());
    read(p, "max_retries", c.provider.max_retries);
    read(p, "temperature", c.provider.temperature);
    if (p.contains("api_key")) {
      throw Error(ErrorCode::kInvalidArgument,
                  "provider.api_key is not accepted; name an environment variable with provider.api_key_ref");
    }

    json e = j.value("embedding", json::object());
    read(e, "kind", c.embedding_kind);
    read(e, "dim", c.embedding_dim);
    read(e, "model", c.embedding_model);

    json ch = j.value("chunking", json::object());
    read(ch, "chunk_size", c.chunking.chunk_size);
    read(ch, "overlap", c.chunking.overlap);

    json r = j.value("retrieval", json::object());
    read(r, "k", c.k);

    json f1 = j.value("flow1", json::object());
    read(f1, "reassess_retained", c.reassess_retained);
    read(f1, "answers_per_round", c.answers_per_round);
    read(f1, "query_bank_file", c.query_bank_file);
    read(f1, "catalog_file", c.catalog_file);

    json f2 = j.value("flow2", json::object());
    if (f2.contains("extraction_mode")) {
      auto m = policy::parse_extraction_mode(f2["extraction_mode"].get<std::string>());
      if (!m) throw Error(ErrorCode::kInvalidArgument, "flow2.extraction_mode must be auto, exhaustive or retrieval");
      c.flow2.mode = *m;
    }
    read(f2, "exhaustive_max_chunks", c.flow2.exhaustive_max_chunks);
    read(f2, "chunks_per_prompt", c.flow2.chunks_per_prompt);
    read(f2, "k_elements", c.flow2.k_elements);
    read(f2, "k_isa", c.flow2.k_isa);
    read(f2, "require_mention", c.flow2.require_mention);

    json pl = j.value("plan", json::object());
    read(pl, "guidance_file", c.guidance_file);
    read(pl, "capability_queries_file", c.capability_queries_file);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid configuration: ") + ex.what());
  }
  if (c.provider_kind != "mock" && c.provider_kind != "openai") {
    throw Error(ErrorCode::kInvalidArgument, "provider.kind must be mock or openai");
  }
  if (c.embedding_kind != "hashing" && c.embedding_kind != "openai") {
    throw Error(ErrorCode::kInvalidArgument, "embedding.kind must be hashing or openai");
  }
  if (c.embedding_dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding.dim must be positive");
  if (c.k == 0) throw Error(ErrorCode::kInvalidArgument, "retrieval.k must be positive");
  return c;
}

json config_to_json(const EngineConfig& c) {
  return {{"provider",
           {{"kind", c.provider_kind},
            {"mock_script", c.mock_script},
            {"endpoint", c.provider.endpoint},
            {"model", c.provider.model_name},
            {"api_key_ref", c.provider.api_key_ref},
            {"timeout_ms", c.provider.timeout.count()},
            {"max_retries", c.provider.max_retries},
            {"temperature", c.provider.temperature}}},
          {"embedding", {{"kind", c.embedding_kind}, {"dim", c.embedding_dim}, {"model", c.embedding_model}}},
          {"chunking", {{"chunk_size", c.chunking.chunk_size}, {"overlap", c.chunking.overlap}}},
          {"retrieval", {{"k", c.k}}},
          {"flow1",
           {{"reassess_retained", c.reassess_retained},
            {"answers_per_round", c.answers_per_round},
            {"query_bank_file", c.query_bank_file},
            {"catalog_file", c.catalog_file}}},
          {"flow2",
           {{"extraction_mode", policy::to_string(c.flow2.mode)},
            {"exhaustive_max_chunks", c.flow2.exhaustive_max_chunks},
            {"chunks_per_prompt", c.flow2.chunks_per_prompt},
            {"k_elements", c.flow2.k_elements},
            {"k_isa", c.flow2.k_isa},
            {"require_mention", c.flow2.require_mention}}},
          {"plan", {{"guidance_file", c.guidance_file}, {"capability_queries_file", c.capability_queries_file}}}};
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return EngineConfig{};
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "config file is not valid JSON: " + path.string());
  return config_from_json(j);
}

}  // namespace hwthreat
