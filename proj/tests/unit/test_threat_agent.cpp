#include <gtest/gtest.h>

#include "hwthreat/error.hpp"
#include "hwthreat/mock_provider.hpp"
#include "hwthreat/threat_agent.hpp"
#include "test_support.hpp"

namespace hwthreat {
namespace {

using nlohmann::json;
using testing::TempDir;

KnowledgeBase fixture_kb(EmbeddingProvider& e) {
  std::vector<SourceDocument> docs;
  for (const auto& [path, kind] : testing::flow1_documents()) {
    docs.push_back(ingest_document(testing::read_text(path), kind, path.filename().string()));
  }
  return KnowledgeBase::build(docs, {400, 50}, e);
}

threat::Flow1Options small_options() {
  threat::Flow1Options o;
  o.k = 3;
  o.catalog.resize(2);  // side_channel, fault_injection
  o.query_bank = {{"a", "Question A?"}, {"b", "Question B?"}, {"c", "Question C?"}};
  return o;
}

class ThreatAgentTest : public ::testing::Test {
 protected:
  ThreatAgentTest() : store_(dir_.path()), embedder_(128), kb_(fixture_kb(embedder_)) {
    id_ = store_.create(Flow::kPhysicalSupplyChain).session_id;
  }

  TempDir dir_;
  SessionStore store_;
  HashingEmbedder embedder_;
  KnowledgeBase kb_;
  std::string id_;
};

TEST_F(ThreatAgentTest, EvidenceComesFromAttackKnowledgeOnly) {
  auto bundles = threat::extract_security_knowledge(kb_, embedder_, default_catalog(), 3);
  ASSERT_EQ(bundles.size(), default_catalog().size());
  for (const auto& [id, b] : bundles) {
    EXPECT_LE(b.hits.size(), 3u);
    EXPECT_FALSE(b.empty()) << id;
    for (const auto& h : b.hits) EXPECT_EQ(kb_.chunk_kind(h.chunk_id), DocKind::kAttackKnowledge);
  }
  // The side-channel query ranks the side-channel document first.
  const auto& top = bundles.at("side_channel").hits.front();
  EXPECT_NE(kb_.find_chunk(top.chunk_id)->text.find("ower"), std::string::npos);
}

TEST_F(ThreatAgentTest, EmptyKnowledgeBaseIsRejected) {
  std::vector<SourceDocument> docs = {ingest_document("spec text", DocKind::kDesignSpec, "s")};
  auto kb = KnowledgeBase::build(docs, {}, embedder_);
  try {
    threat::extract_security_knowledge(kb, embedder_, default_catalog(), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyKnowledgeBase);
  }
}

TEST_F(ThreatAgentTest, BeginRecordsCandidatesAndBank) {
  auto w = store_.open_writer(id_);
  auto opts = small_options();
  threat::begin(w, kb_, embedder_, opts);
  const auto& s = w.state();
  EXPECT_EQ(s.phase, Phase::kInterrogation);
  EXPECT_EQ(s.threats.size(), 2u);
  for (const auto& [id, t] : s.threats) EXPECT_EQ(t.status, ThreatStatus::kCandidate);
  EXPECT_EQ(s.threat_bank.queries.size(), 3u);
  EXPECT_EQ(s.corpus.size(), kb_.documents_of_kind(DocKind::kAttackKnowledge).size());
  // Begin is resumable.
  auto n = w.events().size();
  threat::begin(w, kb_, embedder_, opts);
  EXPECT_EQ(w.events().size(), n);
}

TEST_F(ThreatAgentTest, UnparseableVerdictKeepsStatusAndFlags) {
  MockProvider mock = MockProvider::from_json({{"rules", json::array({
      {{"match", {{"contains", "Threat category: fault_injection"}}}, {"response", "no idea"}},
      {{"match", {{"contains", "Task: threat relevance assessment"}}},
       {"json", {{"relevant", true}, {"rationale", "applies"}}}},
      {{"match", {{"contains", "Task: query-bank redundancy review"}}}, {"json", {{"remove", json::array()}}}},
  })}});
  Gateway g(mock, ProviderConfig{});
  auto w = store_.open_writer(id_);
  auto opts = small_options();
  threat::begin(w, kb_, embedder_, opts);
  auto q = threat::next_query(w);
  ASSERT_TRUE(q);
  threat::submit_answer(w, q->query_id, "answer", opts);
  EXPECT_EQ(w.state().phase, Phase::kAssessment);
  threat::advance(w, g, opts);
  EXPECT_EQ(w.state().phase, Phase::kInterrogation);
  const auto& t = w.state().threats;
  EXPECT_EQ(t.at("side_channel").status, ThreatStatus::kRetained);
  EXPECT_EQ(t.at("side_channel").decided_at, 1);
  EXPECT_EQ(t.at("fault_injection").status, ThreatStatus::kCandidate);
  EXPECT_FALSE(t.at("fault_injection").flag.empty());
  EXPECT_EQ(t.at("fault_injection").assessed_at, 1);
}

TEST_F(ThreatAgentTest, RefinementIgnoresUnknownIdsAndNeverEmptiesEarly) {
  MockProvider mock = MockProvider::from_json({{"rules", json::array({
      {{"match", {{"contains", "Task: threat relevance assessment"}}},
       {"json", {{"relevant", true}, {"rationale", "applies"}}}},
      {{"match", {{"contains", "Task: query-bank redundancy review"}}},
       {"json", {{"remove", {"zz", "a", "b", "c"}}}}},
  })}});
  Gateway g(mock, ProviderConfig{});
  auto w = store_.open_writer(id_);
  auto opts = small_options();
  threat::begin(w, kb_, embedder_, opts);
  auto q = threat::next_query(w);
  threat::submit_answer(w, q->query_id, "answer", opts);
  threat::advance(w, g, opts);
  const auto& s = w.state();
  EXPECT_EQ(s.threat_bank.find("b")->status, QueryStatus::kRemoved);
  EXPECT_EQ(s.threat_bank.find("c")->status, QueryStatus::kRemoved);
  EXPECT_EQ(s.threat_bank.find("a")->status, QueryStatus::kAsked);
  ASSERT_GE(s.warnings.size(), 2u);
  EXPECT_NE(s.warnings[0].find("zz"), std::string::npos);
  // Bank exhausted: the interview can end.
  EXPECT_FALSE(threat::next_query(w));
  threat::finish_interrogation(w);
  EXPECT_EQ(w.state().phase, Phase::kCapabilityGathering);
}

TEST_F(ThreatAgentTest, RunFlowRequiresAnswers) {
  MockProvider mock = MockProvider::from_json({{"rules", json::array()}});
  Gateway g(mock, ProviderConfig{});
  auto w = store_.open_writer(id_);
  ScriptedAnswers none({});
  try {
    threat::run_flow1(w, g, kb_, embedder_, none, small_options());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingAnswer);
  }
  EXPECT_TRUE(pending_query(w.state(), BankId::kThreat));
}

TEST_F(ThreatAgentTest, WrongPhaseIsRejected) {
  auto w = store_.open_writer(id_);
  try {
    threat::next_query(w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidPhase);
  }
}

TEST_F(ThreatAgentTest, DocumentHasNoTimestampsOrSessionId) {
  auto w = store_.open_writer(id_);
  threat::begin(w, kb_, embedder_, small_options());
  auto doc = threat::threat_list_document(w.state()).dump();
  EXPECT_EQ(doc.find(id_), std::string::npos);
  EXPECT_EQ(doc.find("timestamp"), std::string::npos);
  EXPECT_NE(doc.find("hwthreat.threat_list"), std::string::npos);
}

}  // namespace
}  // namespace hwthreat
