#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/gateway.hpp"

namespace hwthreat {

// One scripted rule. Exactly one matcher kind is set:
//   prompt_sha256  - exact prompt, by SHA-256 hex digest
//   contains       - every listed substring occurs in the prompt
//   ordinal        - the Nth call (1-based) made to this provider
// A rule either answers with `response` or fails with `error_message`.
struct MockRule {
  std::optional<std::string> prompt_sha256;
  std::vector<std::string> contains;
  std::optional<std::size_t> ordinal;

  std::string response;
  std::optional<std::string> error_message;
  bool error_retryable = true;
  bool error_timeout = false;

  std::optional<std::size_t> max_uses;  // unlimited when unset
};

// Deterministic scripted provider. Rules are consulted in order and the
// first match wins; a prompt that matches nothing throws kUnscriptedPrompt.
class MockProvider final : public ChatProvider {
 public:
  explicit MockProvider(std::vector<MockRule> rules, std::string model = "mock");
  MockProvider(MockProvider&& other) noexcept
      : rules_(std::move(other.rules_)), uses_(std::move(other.uses_)), model_(std::move(other.model_)),
        calls_(other.calls_) {}

  // Script file format: docs/mock_script.md.
  static MockProvider from_json(const nlohmann::json& script);
  static MockProvider from_file(const std::filesystem::path& path);

  std::string complete(std::string_view prompt) override;
  std::string model_name() const override { return model_; }

  std::size_t calls() const;

 private:
  std::vector<MockRule> rules_;
  std::vector<std::size_t> uses_;
  std::string model_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

}  // namespace hwthreat
