#include "hwthreat/threat_agent.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <set>

#include "hwthreat/assets.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/prompt.hpp"

namespace hwthreat::threat {

using nlohmann::json;

namespace {

void require_flow1(const SessionState& s) {
  if (s.flow != Flow::kPhysicalSupplyChain) {
    throw Error(ErrorCode::kInvalidPhase, "session " + s.session_id + " does not run the threat interview");
  }
}

void require_phase(const SessionState& s, Phase p, std::string_view action) {
  if (s.phase != p) {
    throw Error(ErrorCode::kInvalidPhase,
                std::string(action) + " requires phase " + std::string(to_string(p)) + ", session is in " +
                    std::string(to_string(s.phase)),
                {{"phase", to_string(s.phase)}, {"required", to_string(p)}});
  }
}

void change_phase(SessionWriter& w, Phase to) {
  w.append(EventKind::kPhaseChanged, {{"from", to_string(w.state().phase)}, {"to", to_string(to)}});
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string render_evidence(const EvidenceBundle* bundle) {
  if (!bundle || bundle->empty()) return "(no security knowledge was retrieved for this threat)";
  std::string out;
  for (const auto& h : bundle->hits) {
    out += "[" + h.chunk_id + "] (similarity " + format_score(h.score) + ")\n" + h.text + "\n\n";
  }
  out.pop_back();
  return out;
}

std::string render_transcript(const std::vector<TranscriptEntry>& transcript) {
  if (transcript.empty()) return "(no answers yet)";
  std::string out;
  for (const auto& t : transcript) {
    out += "Q (" + t.query_id + "): " + t.query_text + "\nA: " + t.answer_text + "\n\n";
  }
  out.pop_back();
  return out;
}

const ThreatCategory* find_category(const std::vector<ThreatCategory>& catalog, const std::string& id) {
  for (const auto& c : catalog) {
    if (c.category_id == id) return &c;
  }
  return nullptr;
}

// Categories to assess this round, in issue order.
std::vector<std::string> due_categories(const SessionState& s, const Flow1Options& opts) {
  const int round = s.iteration();
  std::vector<std::string> order;
  if (!opts.issue_order.empty()) {
    order = opts.issue_order;
  } else {
    for (const auto& [id, t] : s.threats) order.push_back(id);
  }
  std::vector<std::string> due;
  for (const auto& id : order) {
    auto it = s.threats.find(id);
    if (it == s.threats.end()) continue;
    const ThreatAssessment& t = it->second;
    if (t.status == ThreatStatus::kPruned || t.assessed_at >= round) continue;
    if (t.status == ThreatStatus::kRetained && !opts.reassess_retained) continue;
    due.push_back(id);
  }
  return due;
}

}  // namespace

std::map<std::string, EvidenceBundle> extract_security_knowledge(const KnowledgeBase& kb, EmbeddingProvider& embedder,
                                                                 const std::vector<ThreatCategory>& catalog,
                                                                 std::size_t k) {
  std::map<std::string, EvidenceBundle> out;
  if (catalog.empty()) return out;
  if (kb.chunks_of_kind(DocKind::kAttackKnowledge).empty()) {
    throw Error(ErrorCode::kEmptyKnowledgeBase, "no attack-knowledge documents are indexed");
  }
  for (const auto& cat : catalog) {
    EvidenceBundle b;
    b.category_id = cat.category_id;
    b.query_used = cat.query;
    for (const auto& sc : kb.search(embedder, cat.query, k, DocKind::kAttackKnowledge)) {
      b.hits.push_back({sc.hit.chunk_id, sc.hit.score, sc.hit.rank, sc.chunk->text});
    }
    if (b.empty()) spdlog::warn("threat {}: no security knowledge retrieved", cat.category_id);
    out.emplace(cat.category_id, std::move(b));
  }
  return out;
}

void begin(SessionWriter& w, const KnowledgeBase& kb, EmbeddingProvider& embedder, const Flow1Options& opts) {
  require_flow1(w.state());
  if (w.state().phase == Phase::kSetup) {
    if (kb.chunks_of_kind(DocKind::kAttackKnowledge).empty() && !opts.catalog.empty()) {
      throw Error(ErrorCode::kEmptyKnowledgeBase, "no attack-knowledge documents are indexed");
    }
    change_phase(w, Phase::kKnowledgeExtraction);
  }
  if (w.state().phase != Phase::kKnowledgeExtraction) return;

  for (const SourceDocument* d : kb.documents_of_kind(DocKind::kAttackKnowledge)) {
    bool bound = std::any_of(w.state().corpus.begin(), w.state().corpus.end(),
                             [&](const CorpusRef& c) { return c.doc_id == d->doc_id; });
    if (!bound) {
      w.append(EventKind::kDocumentIngested, {{"doc_id", d->doc_id},
                                              {"kind", to_string(d->kind)},
                                              {"title", d->title},
                                              {"byte_length", d->byte_length}});
    }
  }

  auto evidence = extract_security_knowledge(kb, embedder, opts.catalog, opts.k);
  for (const auto& cat : opts.catalog) {
    if (w.state().threats.count(cat.category_id)) continue;
    const EvidenceBundle& b = evidence.at(cat.category_id);
    ThreatAssessment t;
    t.category_id = cat.category_id;
    t.label = cat.label;
    for (const auto& h : b.hits) t.evidence_refs.push_back(h.chunk_id);
    w.append(EventKind::kThreatUpdated, {{"threat", t}, {"evidence", b}});
  }
  if (!w.state().threat_bank.initialized) {
    w.append(EventKind::kBankUpdated, {{"bank", "threat"}, {"action", "init"}, {"queries", opts.query_bank}});
  }
  change_phase(w, Phase::kInterrogation);
}

std::optional<Query> next_query(SessionWriter& w) {
  require_flow1(w.state());
  require_phase(w.state(), Phase::kInterrogation, "asking a question");
  return present_next(w, BankId::kThreat);
}

void submit_answer(SessionWriter& w, const std::string& query_id, const std::string& answer,
                   const Flow1Options& opts) {
  require_flow1(w.state());
  require_phase(w.state(), Phase::kInterrogation, "recording an answer");
  const SessionState& s = w.state();
  std::size_t answered = s.transcript.size() + 1;
  std::size_t still_active = s.threat_bank.count(QueryStatus::kActive) - 1;
  std::size_t per_round = std::max<std::size_t>(1, opts.answers_per_round);
  bool assess = answered % per_round == 0 || still_active == 0;
  record_answer(w, BankId::kThreat, query_id, answer, false, assess);
}

std::vector<ThreatAssessment> assess_threats(SessionWriter& w, Gateway& gateway, const Flow1Options& opts) {
  require_flow1(w.state());
  require_phase(w.state(), Phase::kAssessment, "threat assessment");
  const PromptTemplate& tmpl = assets::prompt_template("threat_assessment");
  const int round = w.state().iteration();

  for (const std::string& id : due_categories(w.state(), opts)) {
    const SessionState& s = w.state();
    ThreatAssessment t = s.threats.at(id);
    const ThreatCategory* cat = find_category(opts.catalog, id);
    auto ev = s.evidence.find(id);
    Bindings b{{"category_id", id},
               {"category_label", cat ? cat->label : t.label},
               {"category_description", cat ? cat->description : t.label},
               {"evidence", render_evidence(ev == s.evidence.end() ? nullptr : &ev->second)},
               {"transcript", render_transcript(s.transcript)},
               {"schema_hint", std::string(schema_hint(Schema::kThreatVerdict))}};
    std::string prompt = render_prompt(tmpl, b);

    t.assessed_at = round;
    try {
      json verdict = gateway.structured(prompt, Schema::kThreatVerdict);
      ThreatStatus status = verdict.at("relevant").get<bool>() ? ThreatStatus::kRetained : ThreatStatus::kPruned;
      if (status != t.status) t.decided_at = round;
      t.status = status;
      t.rationale = verdict.at("rationale").get<std::string>();
      t.flag.clear();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSchemaViolation && e.code() != ErrorCode::kNoStructuredContent) throw;
      spdlog::warn("threat {}: assessment unusable, keeping status {} ({})", id, to_string(t.status), e.what());
      t.flag = std::string("assessment could not be parsed: ") + e.what();
    }
    w.append(EventKind::kThreatUpdated, {{"threat", t}});
  }
  return threat_list(w.state());
}

void refine_query_bank(SessionWriter& w, Gateway& gateway) {
  require_flow1(w.state());
  require_phase(w.state(), Phase::kAssessment, "query-bank refinement");
  const SessionState& s = w.state();
  const int round = s.iteration();
  for (const auto& [id, t] : s.threats) {
    (void)id;
    if (t.status != ThreatStatus::kPruned && t.assessed_at < round && t.status == ThreatStatus::kCandidate) {
      throw Error(ErrorCode::kPreconditionFailed, "threat " + t.category_id + " has not been assessed this round");
    }
  }

  std::vector<const Query*> active;
  for (const auto& q : s.threat_bank.queries) {
    if (q.status == QueryStatus::kActive) active.push_back(&q);
  }

  json removed = json::array();
  json warnings = json::array();
  if (!active.empty()) {
    std::string listing;
    for (const Query* q : active) listing += "- " + q->query_id + ": " + q->text + "\n";
    listing.pop_back();
    Bindings b{{"transcript", render_transcript(s.transcript)},
               {"active_queries", listing},
               {"schema_hint", std::string(schema_hint(Schema::kQueryRedundancy))}};
    std::string prompt = render_prompt(assets::prompt_template("query_redundancy"), b);
    try {
      json result = gateway.structured(prompt, Schema::kQueryRedundancy);
      std::set<std::string> taken;
      for (const auto& r : result.at("remove")) {
        std::string qid = r.at("query_id").get<std::string>();
        const Query* q = w.state().threat_bank.find(qid);
        if (!q) {
          warnings.push_back("refinement named unknown query " + qid + "; ignored");
          continue;
        }
        if (q->status != QueryStatus::kActive || taken.count(qid)) {
          warnings.push_back("refinement named query " + qid + " which is no longer active; ignored");
          continue;
        }
        if (w.state().transcript.empty() && taken.size() + 1 == active.size()) {
          warnings.push_back("refinement would empty the bank before any answer; kept " + qid);
          continue;
        }
        taken.insert(qid);
        removed.push_back({{"query_id", qid}, {"reason", r.value("reason", std::string())}});
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSchemaViolation && e.code() != ErrorCode::kNoStructuredContent) throw;
      warnings.push_back(std::string("refinement response unusable; bank unchanged: ") + e.what());
    }
  }
  for (const auto& wmsg : warnings) spdlog::warn("{}", wmsg.get<std::string>());
  w.append(EventKind::kBankUpdated, {{"bank", "threat"},
                                     {"action", "refine"},
                                     {"iteration", round},
                                     {"removed", removed},
                                     {"warnings", warnings}});
}

void advance(SessionWriter& w, Gateway& gateway, const Flow1Options& opts) {
  if (w.state().phase != Phase::kAssessment) return;
  assess_threats(w, gateway, opts);
  refine_query_bank(w, gateway);
}

void finish_interrogation(SessionWriter& w) {
  require_flow1(w.state());
  require_phase(w.state(), Phase::kInterrogation, "closing the interview");
  const QueryBank& bank = w.state().threat_bank;
  if (bank.presented || bank.count(QueryStatus::kActive) > 0) {
    throw Error(ErrorCode::kPreconditionFailed, "the interview still has unanswered queries");
  }
  change_phase(w, Phase::kCapabilityGathering);
}

std::vector<ThreatAssessment> run_flow1(SessionWriter& w, Gateway& gateway, const KnowledgeBase& kb,
                                        EmbeddingProvider& embedder, AnswerSource& source,
                                        const Flow1Options& opts) {
  require_flow1(w.state());
  begin(w, kb, embedder, opts);
  return continue_flow1(w, gateway, source, opts);
}

std::vector<ThreatAssessment> continue_flow1(SessionWriter& w, Gateway& gateway, AnswerSource& source,
                                             const Flow1Options& opts) {
  require_flow1(w.state());
  if (w.state().phase == Phase::kSetup || w.state().phase == Phase::kKnowledgeExtraction) {
    throw Error(ErrorCode::kInvalidPhase, "the threat interview has not started");
  }
  for (;;) {
    Phase phase = w.state().phase;
    if (phase == Phase::kAssessment) {
      advance(w, gateway, opts);
      continue;
    }
    if (phase != Phase::kInterrogation) break;
    std::optional<Query> q = pending_query(w.state(), BankId::kThreat);
    if (!q) q = next_query(w);
    if (!q) {
      finish_interrogation(w);
      break;
    }
    std::optional<std::string> a = source.answer(*q);
    if (!a) {
      throw Error(ErrorCode::kMissingAnswer, "no answer available for query " + q->query_id,
                  {{"query_id", q->query_id}, {"query", q->text}});
    }
    submit_answer(w, q->query_id, *a, opts);
  }
  return threat_list(w.state());
}

std::vector<ThreatAssessment> threat_list(const SessionState& state) {
  std::vector<ThreatAssessment> out;
  for (const auto& [id, t] : state.threats) out.push_back(t);
  return out;
}

json threat_list_document(const SessionState& s) {
  json corpus = json::array();
  for (const auto& c : s.corpus) {
    if (c.kind == DocKind::kAttackKnowledge) corpus.push_back({{"doc_id", c.doc_id}, {"title", c.title}});
  }
  auto versions = assets::template_versions();
  std::size_t retained = 0, pruned = 0, candidate = 0, flagged = 0;
  json threats = json::array();
  for (const auto& t : threat_list(s)) {
    switch (t.status) {
      case ThreatStatus::kRetained: ++retained; break;
      case ThreatStatus::kPruned: ++pruned; break;
      case ThreatStatus::kCandidate: ++candidate; break;
    }
    if (!t.flag.empty()) ++flagged;
    threats.push_back(t);
  }
  json evidence = json::array();
  for (const auto& [id, b] : s.evidence) {
    json hits = json::array();
    for (const auto& h : b.hits) hits.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}, {"rank", h.rank}});
    evidence.push_back({{"category_id", id}, {"query_used", b.query_used}, {"hits", hits}});
  }
  json transcript = json::array();
  for (const auto& t : s.transcript) {
    transcript.push_back({{"query_id", t.query_id}, {"query_text", t.query_text}, {"answer_text", t.answer_text}});
  }
  json bank = json::array();
  for (const auto& q : s.threat_bank.queries) bank.push_back(q);
  bool final = s.phase != Phase::kSetup && s.phase != Phase::kKnowledgeExtraction &&
               s.phase != Phase::kInterrogation && s.phase != Phase::kAssessment;
  return {{"schema", "hwthreat.threat_list"},
          {"schema_version", 1},
          {"flow", to_string(s.flow)},
          {"final", final},
          {"metadata",
           {{"corpus", corpus},
            {"template_versions",
             {{"threat_assessment", versions.at("threat_assessment")},
              {"query_redundancy", versions.at("query_redundancy")}}},
            {"model_name", s.model_name}}},
          {"summary",
           {{"retained", retained},
            {"pruned", pruned},
            {"candidate", candidate},
            {"flagged", flagged},
            {"iterations", s.transcript.size()}}},
          {"threats", threats},
          {"evidence", evidence},
          {"transcript", transcript},
          {"query_bank", bank},
          {"warnings", s.warnings}};
}

}  // namespace hwthreat::threat
