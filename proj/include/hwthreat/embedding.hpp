#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace hwthreat {

// Dense embedding. Constructed only through make(), which enforces dim >= 1
// and finite entries.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  static EmbeddingVector make(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }

  EmbeddingVector scaled(double factor) const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  // Raw provider call; embed_text() validates the result.
  virtual std::vector<double> embed_raw(std::string_view text) = 0;
};

// Throws kInvalidQuery for blank text, kDimensionMismatch when the provider
// returns a vector of a dimension other than the one it declares.
EmbeddingVector embed_text(std::string_view text, EmbeddingProvider& provider);

// Deterministic offline embedder: signed feature hashing of lowercase word
// tokens with a small English stopword list removed. Identical text always
// yields bitwise-identical vectors, and texts sharing vocabulary score higher.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim = 256);
  std::size_t dimension() const override { return dim_; }
  std::vector<double> embed_raw(std::string_view text) override;

 private:
  std::size_t dim_;
};

}  // namespace hwthreat
