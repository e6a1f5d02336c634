#include <gtest/gtest.h>

#include "hwthreat/error.hpp"
#include "hwthreat/gateway.hpp"
#include "hwthreat/mock_provider.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {
namespace {

using nlohmann::json;
using std::chrono::milliseconds;

MockProvider script(const json& rules) { return MockProvider::from_json({{"rules", rules}}); }

struct Recorder {
  std::vector<milliseconds> sleeps;
  std::vector<ChatExchange> logged;
  void attach(Gateway& g) {
    g.set_sleeper([this](milliseconds d) { sleeps.push_back(d); });
    g.set_sink([this](const ChatExchange& x) { logged.push_back(x); });
  }
};

TEST(MockProvider, FirstMatchWinsAndTimesLimitsUse) {
  auto m = script(json::array({
      {{"match", {{"contains", {"alpha", "beta"}}}}, {"response", "both"}, {"times", 1}},
      {{"match", {{"contains", "alpha"}}}, {"response", "alpha"}},
      {{"match", {{"prompt", "exact"}}}, {"json", {{"k", 1}}}},
  }));
  EXPECT_EQ(m.complete("alpha beta"), "both");
  EXPECT_EQ(m.complete("alpha beta"), "alpha");
  EXPECT_EQ(m.complete("exact"), R"({"k":1})");
  EXPECT_EQ(m.calls(), 3u);
  try {
    m.complete("nothing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnscriptedPrompt);
    EXPECT_EQ(e.details()["prompt_sha256"], text::sha256_hex("nothing"));
  }
}

TEST(MockProvider, OrdinalAndShaMatchers) {
  auto m = script(json::array({
      {{"match", {{"ordinal", 2}}}, {"response", "second"}},
      {{"match", {{"sha256", text::sha256_hex("p")}}}, {"response", "by digest"}},
  }));
  EXPECT_EQ(m.complete("p"), "by digest");
  EXPECT_EQ(m.complete("p"), "second");
}

TEST(MockProvider, RejectsMalformedScripts) {
  EXPECT_THROW(MockProvider::from_json(json::object()), Error);
  EXPECT_THROW(script(json::array({{{"match", json::object()}, {"response", "x"}}})), Error);
  EXPECT_THROW(script(json::array({{{"match", {{"ordinal", 1}}}}})), Error);
}

TEST(Gateway, RetriesWithExponentialBackoff) {
  auto m = script(json::array({
      {{"match", {{"contains", "p"}}}, {"error", {{"message", "503"}}}, {"times", 3}},
      {{"match", {{"contains", "p"}}}, {"response", "ok"}},
  }));
  Gateway g(m, ProviderConfig{});
  Recorder r;
  r.attach(g);
  auto x = g.chat("p");
  EXPECT_EQ(x.response, "ok");
  EXPECT_EQ(x.attempt, 4);
  EXPECT_EQ(r.sleeps, (std::vector<milliseconds>{milliseconds(250), milliseconds(500), milliseconds(1000)}));
  ASSERT_EQ(r.logged.size(), 1u);
  EXPECT_EQ(g.provider_calls(), 4u);
}

TEST(Gateway, BackoffIsCappedAndLastErrorRethrown) {
  auto m = script(json::array({{{"match", {{"contains", "p"}}}, {"error", {{"message", "down"}}}}}));
  ProviderConfig cfg;
  cfg.max_retries = 7;
  Gateway g(m, cfg);
  Recorder r;
  r.attach(g);
  try {
    g.chat("p");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProviderError);
  }
  ASSERT_EQ(r.sleeps.size(), 7u);
  EXPECT_EQ(r.sleeps.back(), milliseconds(8000));
  EXPECT_EQ(r.sleeps[5], milliseconds(8000));
  EXPECT_EQ(r.sleeps[4], milliseconds(4000));
  EXPECT_TRUE(r.logged.empty());
}

TEST(Gateway, NonRetryableFailsImmediatelyAndTimeoutRetries) {
  auto m = script(json::array({
      {{"match", {{"contains", "auth"}}}, {"error", {{"message", "401"}, {"retryable", false}}}},
      {{"match", {{"contains", "slow"}}}, {"error", {{"timeout", true}}}, {"times", 1}},
      {{"match", {{"contains", "slow"}}}, {"response", "late"}},
  }));
  Gateway g(m, ProviderConfig{});
  Recorder r;
  r.attach(g);
  EXPECT_THROW(g.chat("auth"), Error);
  EXPECT_TRUE(r.sleeps.empty());
  EXPECT_EQ(g.chat("slow").response, "late");
  EXPECT_EQ(r.sleeps.size(), 1u);
}

TEST(Gateway, StructuredRepairsOnce) {
  auto m = script(json::array({
      {{"match", {{"contains", "could not be used"}}}, {"response", R"({"relevant": true, "rationale": "fixed"})"}},
      {{"match", {{"contains", "assess"}}}, {"response", "I think it is relevant."}},
  }));
  Gateway g(m, ProviderConfig{});
  Recorder r;
  r.attach(g);
  auto v = g.structured("assess this", Schema::kThreatVerdict);
  EXPECT_EQ(v["rationale"], "fixed");
  ASSERT_EQ(r.logged.size(), 2u);
  EXPECT_NE(r.logged[1].prompt.find("assess this"), std::string::npos);
}

TEST(Gateway, StructuredGivesUpAfterOneRepair) {
  auto m = script(json::array({{{"match", {{"contains", "assess"}}}, {"response", "{\"relevant\": 3}"}}}));
  Gateway g(m, ProviderConfig{});
  try {
    g.structured("assess", Schema::kThreatVerdict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
  }
  EXPECT_EQ(m.calls(), 2u);
}

TEST(Gateway, SemanticCheckTriggersRepair) {
  auto m = script(json::array({
      {{"match", {{"contains", "could not be used"}}}, {"json", {{"names", {"good"}}}}},
      {{"match", {{"contains", "list"}}}, {"json", {{"names", {"bad"}}}}},
  }));
  Gateway g(m, ProviderConfig{});
  auto v = g.structured("list", Schema::kElementNames, [](const json& j) {
    return j["names"][0] == "bad" ? std::vector<std::string>{"bad name"} : std::vector<std::string>{};
  });
  EXPECT_EQ(v["names"][0], "good");
}

TEST(Gateway, ReplayAnswersWithoutProviderOrSink) {
  auto m = script(json::array());
  Gateway g(m, ProviderConfig{});
  Recorder r;
  r.attach(g);
  g.preload_replay({ChatExchange{"p", "first", "mock"}, ChatExchange{"p", "second", "mock"}});
  EXPECT_EQ(g.chat("p").response, "first");
  EXPECT_EQ(g.chat("p").response, "second");
  EXPECT_THROW(g.chat("p"), Error);
  EXPECT_TRUE(r.logged.empty());
  EXPECT_EQ(g.provider_calls(), 1u);
}

}  // namespace
}  // namespace hwthreat
