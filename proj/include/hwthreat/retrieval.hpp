#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hwthreat/corpus.hpp"
#include "hwthreat/embedding.hpp"

namespace hwthreat {

struct RetrievalHit {
  std::string chunk_id;
  double score = 0.0;  // cosine similarity, clamped to [-1, 1]
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

// Exact flat cosine index. Readers may share a const index across threads;
// add() needs exclusive access.
class VectorIndex {
 public:
  struct Entry {
    std::string chunk_id;
    DocKind kind;
    std::vector<double> values;
    double norm;
  };

  explicit VectorIndex(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const std::string& chunk_id) const { return positions_.count(chunk_id) != 0; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t count_kind(DocKind kind) const;

  // Throws kDuplicateChunk or kDimensionMismatch.
  void add(const std::string& chunk_id, const EmbeddingVector& vector, DocKind kind);

  // Top-k by cosine, ordered by score descending then chunk_id ascending.
  // Zero-norm vectors score 0. Scoring runs as an OpenMP parallel loop with
  // per-thread top-k buffers merged at the end.
  std::vector<RetrievalHit> search(const EmbeddingVector& query, std::size_t k,
                                   std::optional<DocKind> kind_filter = std::nullopt) const;

  // Single-threaded reference of search(); same results, kept for tests and
  // the benchmark.
  std::vector<RetrievalHit> search_serial(const EmbeddingVector& query, std::size_t k,
                                          std::optional<DocKind> kind_filter = std::nullopt) const;

  // Binary format, see docs/formats.md.
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

 private:
  std::size_t dim_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> positions_;
};

// Ranking predicate shared by both search paths.
bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b);

}  // namespace hwthreat
