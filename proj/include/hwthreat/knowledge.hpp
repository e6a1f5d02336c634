#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hwthreat/corpus.hpp"
#include "hwthreat/embedding.hpp"
#include "hwthreat/retrieval.hpp"

namespace hwthreat {

struct ScoredChunk {
  RetrievalHit hit;
  const Chunk* chunk;
};

// Documents, their chunks and the embedding index over those chunks.
class KnowledgeBase {
 public:
  KnowledgeBase(std::vector<SourceDocument> docs, std::vector<Chunk> chunks, VectorIndex index);

  // Chunks every document and embeds every chunk.
  static KnowledgeBase build(std::vector<SourceDocument> docs, const ChunkingParams& params,
                             EmbeddingProvider& embedder);

  const std::vector<SourceDocument>& documents() const noexcept { return docs_; }
  const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
  const VectorIndex& index() const noexcept { return index_; }

  const Chunk* find_chunk(std::string_view chunk_id) const;
  std::optional<DocKind> chunk_kind(std::string_view chunk_id) const;
  // Chunks of one document kind, in document then ordinal order.
  std::vector<const Chunk*> chunks_of_kind(DocKind kind) const;
  std::vector<const SourceDocument*> documents_of_kind(DocKind kind) const;

  std::vector<ScoredChunk> search(EmbeddingProvider& embedder, std::string_view query, std::size_t k,
                                  std::optional<DocKind> kind_filter) const;

 private:
  std::vector<SourceDocument> docs_;
  std::vector<Chunk> chunks_;
  VectorIndex index_;
  std::map<std::string, std::size_t, std::less<>> chunk_pos_;
  std::map<std::string, DocKind, std::less<>> doc_kind_;
};

}  // namespace hwthreat
