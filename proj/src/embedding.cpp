#include "hwthreat/embedding.hpp"

#include <cmath>
#include <set>
#include <string>

#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {

EmbeddingVector EmbeddingVector::make(std::vector<double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "embedding must have at least one dimension");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "embedding has a non-finite entry");
  }
  return EmbeddingVector(std::move(values));
}

EmbeddingVector EmbeddingVector::scaled(double factor) const {
  std::vector<double> v = values_;
  for (double& x : v) x *= factor;
  return make(std::move(v));
}

EmbeddingVector embed_text(std::string_view text, EmbeddingProvider& provider) {
  if (text::is_blank(text)) throw Error(ErrorCode::kInvalidQuery, "cannot embed empty text");
  std::vector<double> raw = provider.embed_raw(text);
  if (raw.size() != provider.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "provider returned an unexpected embedding dimension",
                {{"expected", provider.dimension()}, {"actual", raw.size()}});
  }
  return EmbeddingVector::make(std::move(raw));
}

namespace {
const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "and",  "are",   "as",   "at",    "be",   "by",    "can",  "for",
      "from", "has",  "have", "in",    "is",   "it",    "its",  "may",   "of",   "on",
      "or",   "that", "the",  "their", "then", "there", "this", "these", "to",   "was",
      "were", "which", "will", "with", "when", "where", "who",  "all",   "any",  "into",
      "not",  "such", "than", "them",  "they", "been",  "but",  "do",    "does", "if"};
  return words;
}
}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be >= 1");
}

std::vector<double> HashingEmbedder::embed_raw(std::string_view text) {
  std::vector<double> v(dim_, 0.0);
  for (const std::string& tok : text::word_tokens(text)) {
    if (stopwords().count(tok)) continue;
    std::uint64_t h = text::fnv1a64(tok);
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % dim_] += sign;
  }
  return v;
}

}  // namespace hwthreat
