#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/gateway.hpp"
#include "hwthreat/interview.hpp"
#include "hwthreat/knowledge.hpp"
#include "hwthreat/session.hpp"

// Physical and supply-chain threat identification.
namespace hwthreat::threat {

struct Flow1Options {
  std::size_t k = 8;
  // Re-assess retained threats after every answer, not only candidates.
  bool reassess_retained = true;
  // Answers collected before each assessment round.
  std::size_t answers_per_round = 1;
  std::vector<ThreatCategory> catalog = default_catalog();
  std::vector<Query> query_bank = default_query_bank();
  // Optional order in which categories are assessed (a permutation of the
  // catalog ids); empty means catalog id order.
  std::vector<std::string> issue_order;
};

// Retrieves the top-k attack-knowledge chunks for every category's query.
// Throws kEmptyKnowledgeBase when no attack-knowledge chunk is indexed.
std::map<std::string, EvidenceBundle> extract_security_knowledge(const KnowledgeBase& kb, EmbeddingProvider& embedder,
                                                                 const std::vector<ThreatCategory>& catalog,
                                                                 std::size_t k);

// setup -> knowledge_extraction -> interrogation. Records the corpus, one
// candidate per category with its evidence, and the query bank. Resumes a
// partially recorded start.
void begin(SessionWriter& writer, const KnowledgeBase& kb, EmbeddingProvider& embedder, const Flow1Options& opts);

// Presents the next active query; nullopt once the bank is exhausted.
// Throws kInvalidPhase outside the interrogation phase, kPendingAnswer when
// the presented query is unanswered.
std::optional<Query> next_query(SessionWriter& writer);

// Records the answer to the presented query. Enters the assessment phase
// when a round of answers is complete.
void submit_answer(SessionWriter& writer, const std::string& query_id, const std::string& answer,
                   const Flow1Options& opts);

// Re-evaluates every live category against the interview so far. Responses
// that cannot be parsed keep the prior status and set the flag.
std::vector<ThreatAssessment> assess_threats(SessionWriter& writer, Gateway& gateway, const Flow1Options& opts);

// Removes redundant queries from the bank and returns to interrogation.
void refine_query_bank(SessionWriter& writer, Gateway& gateway);

// Completes an assessment round (assess + refine) if one is due.
void advance(SessionWriter& writer, Gateway& gateway, const Flow1Options& opts);

// interrogation -> capability_gathering; requires an exhausted bank.
void finish_interrogation(SessionWriter& writer);

// Drives the whole threat interview with answers from `source` and returns
// the final threat list. Picks up wherever the session stopped. Throws
// kMissingAnswer when the source has no answer for a presented query.
std::vector<ThreatAssessment> run_flow1(SessionWriter& writer, Gateway& gateway, const KnowledgeBase& kb,
                                        EmbeddingProvider& embedder, AnswerSource& source,
                                        const Flow1Options& opts);

// The interview loop of run_flow1 for a session whose knowledge extraction
// is already recorded.
std::vector<ThreatAssessment> continue_flow1(SessionWriter& writer, Gateway& gateway, AnswerSource& source,
                                             const Flow1Options& opts);

std::vector<ThreatAssessment> threat_list(const SessionState& state);

// The threat_list artifact. Free of timestamps and session identity so that
// equal runs give identical bytes.
nlohmann::json threat_list_document(const SessionState& state);

}  // namespace hwthreat::threat
