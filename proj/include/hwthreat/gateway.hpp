#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/structured.hpp"

namespace hwthreat {

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o";
  std::string api_key_ref = "OPENAI_API_KEY";  // env var name; the value is never stored
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  double temperature = 0.0;
};

// One chat-completion backend. Implementations throw Error(kProviderError)
// with the retryable flag set for transport, rate-limit and 5xx failures,
// and Error(kTimeout) when the request exceeds its deadline.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string complete(std::string_view prompt) = 0;
  virtual std::string model_name() const = 0;
};

struct ChatExchange {
  std::string prompt;
  std::string response;
  std::string provider;
  std::chrono::milliseconds latency{0};
  int attempt = 1;
};

nlohmann::json to_json(const ChatExchange& x);

// Extra validation applied after schema validation; a non-empty result counts
// as a schema violation and triggers the repair round-trip.
using SemanticCheck = std::function<std::vector<std::string>(const nlohmann::json&)>;

class Gateway {
 public:
  using Sink = std::function<void(const ChatExchange&)>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(ChatProvider& provider, ProviderConfig config);

  const ProviderConfig& config() const noexcept { return config_; }
  std::string model_name() const { return provider_.model_name(); }

  // Receives every successful exchange (the session event log).
  void set_sink(Sink sink) { sink_ = std::move(sink); }
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  // Responses already recorded for prompts whose results were never applied
  // (a crash between the exchange and its effect). Matching prompts are
  // answered from here, in order, without contacting the provider.
  void preload_replay(const std::vector<ChatExchange>& exchanges);

  // Retries retryable failures up to max_retries times with exponential
  // backoff (250 ms doubling, capped at 8 s). The last error is rethrown.
  ChatExchange chat(const std::string& prompt);

  // chat + parse_structured. On a parse or validation failure issues exactly
  // one repair prompt carrying the violations, then gives up with the
  // repair's error.
  nlohmann::json structured(const std::string& prompt, Schema schema, const SemanticCheck& check = {});

  std::size_t provider_calls() const noexcept { return provider_calls_; }

 private:
  nlohmann::json parse_checked(const std::string& response, Schema schema, const SemanticCheck& check);

  ChatProvider& provider_;
  ProviderConfig config_;
  Sink sink_;
  Sleeper sleeper_;
  std::map<std::string, std::deque<ChatExchange>> replay_;
  std::size_t provider_calls_ = 0;
};

}  // namespace hwthreat
