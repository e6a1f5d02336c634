#pragma once

#include <string>

#include "hwthreat/embedding.hpp"
#include "hwthreat/gateway.hpp"

namespace hwthreat {

// OpenAI-compatible chat completions over HTTP(S):
//   POST {endpoint}/chat/completions  {"model", "messages": [{"role":"user",...}], "temperature"}
// The bearer token is read from the environment variable named by
// config.api_key_ref at request time and is never retained.
class OpenAiChatProvider final : public ChatProvider {
 public:
  explicit OpenAiChatProvider(ProviderConfig config);
  std::string complete(std::string_view prompt) override;
  std::string model_name() const override { return config_.model_name; }

 private:
  ProviderConfig config_;
};

// POST {endpoint}/embeddings {"model", "input"}; the declared dimension is
// checked by embed_text().
class OpenAiEmbedder final : public EmbeddingProvider {
 public:
  OpenAiEmbedder(ProviderConfig config, std::size_t dim);
  std::size_t dimension() const override { return dim_; }
  std::vector<double> embed_raw(std::string_view text) override;

 private:
  ProviderConfig config_;
  std::size_t dim_;
};

}  // namespace hwthreat
