#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hwthreat {

enum class DocKind { kDesignSpec, kIsaManual, kAttackKnowledge };

std::string_view to_string(DocKind kind);
std::optional<DocKind> parse_doc_kind(std::string_view s);

struct SourceDocument {
  std::string doc_id;
  DocKind kind = DocKind::kDesignSpec;
  std::string title;
  std::string body;  // normalized UTF-8, LF line endings
  std::size_t byte_length = 0;
  std::size_t char_length = 0;  // code points; chunk spans index these

  bool operator==(const SourceDocument&) const = default;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t ordinal = 0;
  std::size_t start = 0;  // [start, end) in code points of the parent body
  std::size_t end = 0;
  std::string text;

  bool operator==(const Chunk&) const = default;
};

struct ChunkingParams {
  std::size_t chunk_size = 1600;
  std::size_t overlap = 200;
};

/// Decodes, normalizes and identifies a raw text document.
///
/// Invalid UTF-8 sequences are replaced with U+FFFD and a warning is logged.
/// Line endings become LF, trailing whitespace is stripped from every line and
/// trailing blank lines are dropped. The doc_id is derived from kind, title and
/// normalized body, so re-ingesting identical input yields the same id.
///
/// Throws Error(kEmptyDocument) when nothing but whitespace remains and
/// Error(kDecodeFailure) for binary input (NUL bytes, or more than a quarter of
/// the bytes undecodable).
SourceDocument ingest_document(std::string_view bytes, DocKind kind, std::string title);

/// Fixed-stride character chunking: chunk i starts at i * (chunk_size - overlap)
/// and the final chunk ends exactly at the end of the body.
std::vector<Chunk> chunk_document(const SourceDocument& doc, std::size_t chunk_size,
                                  std::size_t overlap);

inline std::vector<Chunk> chunk_document(const SourceDocument& doc, const ChunkingParams& p) {
  return chunk_document(doc, p.chunk_size, p.overlap);
}

void to_json(nlohmann::json& j, const SourceDocument& d);
void from_json(const nlohmann::json& j, SourceDocument& d);
void to_json(nlohmann::json& j, const Chunk& c);
void from_json(const nlohmann::json& j, Chunk& c);

}  // namespace hwthreat
