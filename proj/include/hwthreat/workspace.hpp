#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/config.hpp"
#include "hwthreat/knowledge.hpp"
#include "hwthreat/session.hpp"

namespace hwthreat {

// On-disk layout (docs/formats.md):
//   config.json
//   documents/<doc_id>.json
//   index/{index.bin,chunks.jsonl,manifest.json}
//   sessions/<session_id>/...
//   current_session
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path config_path() const { return root_ / "config.json"; }
  std::filesystem::path sessions_dir() const { return root_ / "sessions"; }
  std::filesystem::path artifacts_dir(const std::string& session_id) const {
    return sessions_dir() / session_id / "artifacts";
  }
  // Resolves a path from the configuration against the workspace root.
  std::filesystem::path resolve(const std::string& path) const;

  // Stores a normalized document. Re-adding identical content is a no-op.
  SourceDocument add_document(std::string_view bytes, DocKind kind, std::string title);
  std::vector<SourceDocument> documents() const;

  // Chunks and embeds every stored document; returns the manifest.
  nlohmann::json build_index(EmbeddingProvider& embedder, const ChunkingParams& params,
                             const std::string& embedder_id);
  // Throws kPreconditionFailed when the index is missing or older than the
  // stored documents.
  KnowledgeBase load_knowledge() const;
  std::optional<nlohmann::json> manifest() const;

  std::optional<std::string> current_session() const;
  void set_current_session(const std::string& id);

 private:
  std::filesystem::path root_;
};

// Writes through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace hwthreat
