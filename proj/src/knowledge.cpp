#include "hwthreat/knowledge.hpp"

#include "hwthreat/error.hpp"

namespace hwthreat {

KnowledgeBase::KnowledgeBase(std::vector<SourceDocument> docs, std::vector<Chunk> chunks, VectorIndex index)
    : docs_(std::move(docs)), chunks_(std::move(chunks)), index_(std::move(index)) {
  for (const auto& d : docs_) {
    if (!doc_kind_.emplace(d.doc_id, d.kind).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate doc_id " + d.doc_id);
    }
  }
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (!doc_kind_.count(chunks_[i].doc_id)) {
      throw Error(ErrorCode::kInvalidArgument, "chunk " + chunks_[i].chunk_id + " has no parent document");
    }
    chunk_pos_.emplace(chunks_[i].chunk_id, i);
  }
}

KnowledgeBase KnowledgeBase::build(std::vector<SourceDocument> docs, const ChunkingParams& params,
                                   EmbeddingProvider& embedder) {
  std::vector<Chunk> chunks;
  VectorIndex index(embedder.dimension());
  for (const auto& d : docs) {
    for (Chunk& c : chunk_document(d, params)) {
      index.add(c.chunk_id, embed_text(c.text, embedder), d.kind);
      chunks.push_back(std::move(c));
    }
  }
  return KnowledgeBase(std::move(docs), std::move(chunks), std::move(index));
}

const Chunk* KnowledgeBase::find_chunk(std::string_view chunk_id) const {
  auto it = chunk_pos_.find(chunk_id);
  return it == chunk_pos_.end() ? nullptr : &chunks_[it->second];
}

std::optional<DocKind> KnowledgeBase::chunk_kind(std::string_view chunk_id) const {
  const Chunk* c = find_chunk(chunk_id);
  if (!c) return std::nullopt;
  return doc_kind_.find(c->doc_id)->second;
}

std::vector<const Chunk*> KnowledgeBase::chunks_of_kind(DocKind kind) const {
  std::vector<const Chunk*> out;
  for (const auto& c : chunks_) {
    if (doc_kind_.find(c.doc_id)->second == kind) out.push_back(&c);
  }
  return out;
}

std::vector<const SourceDocument*> KnowledgeBase::documents_of_kind(DocKind kind) const {
  std::vector<const SourceDocument*> out;
  for (const auto& d : docs_) {
    if (d.kind == kind) out.push_back(&d);
  }
  return out;
}

std::vector<ScoredChunk> KnowledgeBase::search(EmbeddingProvider& embedder, std::string_view query,
                                               std::size_t k, std::optional<DocKind> kind_filter) const {
  std::vector<ScoredChunk> out;
  for (RetrievalHit& h : index_.search(embed_text(query, embedder), k, kind_filter)) {
    const Chunk* c = find_chunk(h.chunk_id);
    if (!c) throw Error(ErrorCode::kStorageFailure, "index refers to unknown chunk " + h.chunk_id);
    out.push_back({std::move(h), c});
  }
  return out;
}

}  // namespace hwthreat
