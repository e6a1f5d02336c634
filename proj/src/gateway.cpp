#include "hwthreat/gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <thread>

#include "hwthreat/assets.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/prompt.hpp"

namespace hwthreat {

using nlohmann::json;

json to_json(const ChatExchange& x) {
  return {{"prompt", x.prompt},
          {"response", x.response},
          {"provider", x.provider},
          {"latency_ms", x.latency.count()},
          {"attempt", x.attempt}};
}

Gateway::Gateway(ChatProvider& provider, ProviderConfig config)
    : provider_(provider),
      config_(std::move(config)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

void Gateway::preload_replay(const std::vector<ChatExchange>& exchanges) {
  for (const auto& x : exchanges) replay_[x.prompt].push_back(x);
}

ChatExchange Gateway::chat(const std::string& prompt) {
  if (auto it = replay_.find(prompt); it != replay_.end() && !it->second.empty()) {
    ChatExchange x = it->second.front();
    it->second.pop_front();
    return x;
  }
  const int attempts = std::max(0, config_.max_retries) + 1;
  std::chrono::milliseconds backoff{250};
  for (int attempt = 1;; ++attempt) {
    auto started = std::chrono::steady_clock::now();
    try {
      ++provider_calls_;
      std::string response = provider_.complete(prompt);
      ChatExchange x{prompt, std::move(response), provider_.model_name(),
                     std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started),
                     attempt};
      if (sink_) sink_(x);
      return x;
    } catch (const Error& e) {
      bool retryable = e.code() == ErrorCode::kTimeout ||
                       (e.code() == ErrorCode::kProviderError && e.retryable());
      if (!retryable || attempt >= attempts) throw;
      spdlog::warn("provider call failed (attempt {}/{}): {}", attempt, attempts, e.what());
      sleeper_(backoff);
      backoff = std::min(backoff * 2, std::chrono::milliseconds{8000});
    }
  }
}

json Gateway::parse_checked(const std::string& response, Schema schema, const SemanticCheck& check) {
  json value = parse_structured(response, schema);
  if (check) {
    auto problems = check(value);
    if (!problems.empty()) {
      throw Error(ErrorCode::kSchemaViolation, "response failed validation",
                  {{"schema", to_string(schema)}, {"violations", problems}});
    }
  }
  return value;
}

json Gateway::structured(const std::string& prompt, Schema schema, const SemanticCheck& check) {
  ChatExchange first = chat(prompt);
  std::string problem;
  try {
    return parse_checked(first.response, schema, check);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSchemaViolation && e.code() != ErrorCode::kNoStructuredContent) throw;
    problem = e.what();
    if (e.details().contains("violations")) {
      for (const auto& v : e.details()["violations"]) problem += "\n- " + v.get<std::string>();
    }
  }
  std::string repair = render_prompt(assets::prompt_template("repair"),
                                     {{"original_prompt", prompt},
                                      {"previous_response", first.response},
                                      {"problems", problem},
                                      {"schema_hint", std::string(schema_hint(schema))}});
  ChatExchange second = chat(repair);
  return parse_checked(second.response, schema, check);
}

}  // namespace hwthreat
