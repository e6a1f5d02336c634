#include "hwthreat/policy_agent.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "hwthreat/assets.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/prompt.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat::policy {

using nlohmann::json;

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

bool is_parse_failure(const Error& e) {
  return e.code() == ErrorCode::kSchemaViolation || e.code() == ErrorCode::kNoStructuredContent;
}

std::string render_excerpts(const std::vector<const Chunk*>& chunks) {
  std::string out;
  for (const Chunk* c : chunks) out += "[" + c->chunk_id + "]\n" + c->text + "\n\n";
  if (!out.empty()) out.pop_back();
  return out;
}

std::string element_query(ElementKind kind) {
  return kind == ElementKind::kRegister
             ? "registers, control and status registers and register fields used by the design"
             : "instructions and instruction encodings implemented by the design";
}

void extract_from_batch(ElementKind kind, const std::vector<const Chunk*>& batch, Gateway& gateway,
                        ElementExtraction& out) {
  Bindings b{{"element_kind", std::string(to_string(kind))},
             {"excerpts", render_excerpts(batch)},
             {"schema_hint", std::string(schema_hint(Schema::kElementNames))}};
  std::string prompt = render_prompt(assets::prompt_template("element_extraction"), b);
  json result;
  try {
    result = gateway.structured(prompt, Schema::kElementNames);
  } catch (const Error& e) {
    if (!is_parse_failure(e)) throw;
    out.warnings.push_back("element extraction (" + std::string(to_string(kind)) + ", " + batch.front()->chunk_id +
                           "): response unusable, batch skipped: " + e.what());
    return;
  }
  for (const auto& n : result.at("names")) {
    std::string name = text::collapse_whitespace(text::trim(n.get<std::string>()));
    if (name.empty()) continue;
    DesignElement el;
    el.kind = kind;
    el.name = name;
    el.norm_key = normalize_element_key(name);
    for (const Chunk* c : batch) {
      if (mentions(c->text, name)) el.source_refs.push_back(c->chunk_id);
    }
    if (el.source_refs.empty()) {
      out.warnings.push_back(std::string(to_string(kind)) + " '" + name +
                             "' does not occur in its excerpts; dropped");
      continue;
    }
    out.elements.push_back(std::move(el));
  }
}

void change_phase(SessionWriter& w, Phase to, const std::string& reason = {}) {
  json p = {{"from", to_string(w.state().phase)}, {"to", to_string(to)}};
  if (!reason.empty()) p["reason"] = reason;
  w.append(EventKind::kPhaseChanged, p);
}

}  // namespace

std::string_view to_string(ExtractionMode m) {
  switch (m) {
    case ExtractionMode::kAuto: return "auto";
    case ExtractionMode::kExhaustive: return "exhaustive";
    case ExtractionMode::kRetrieval: return "retrieval";
  }
  return "auto";
}

std::optional<ExtractionMode> parse_extraction_mode(std::string_view s) {
  if (s == "auto") return ExtractionMode::kAuto;
  if (s == "exhaustive") return ExtractionMode::kExhaustive;
  if (s == "retrieval") return ExtractionMode::kRetrieval;
  return std::nullopt;
}

bool mentions(std::string_view text, std::string_view name) {
  std::string hay = text::to_lower(text::collapse_whitespace(text));
  std::string needle = text::to_lower(text::collapse_whitespace(name));
  if (needle.empty()) return false;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]) || !is_word_char(needle.front());
    std::size_t end = pos + needle.size();
    bool right_ok = end == hay.size() || !is_word_char(hay[end]) || !is_word_char(needle.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

ElementExtraction extract_design_elements(const KnowledgeBase& kb, EmbeddingProvider& embedder, Gateway& gateway,
                                          const Flow2Options& opts) {
  std::vector<const Chunk*> spec = kb.chunks_of_kind(DocKind::kDesignSpec);
  if (spec.empty()) throw Error(ErrorCode::kEmptySpecIndex, "no design specification is indexed");
  ExtractionMode mode = opts.mode;
  if (mode == ExtractionMode::kAuto) {
    mode = spec.size() <= opts.exhaustive_max_chunks ? ExtractionMode::kExhaustive : ExtractionMode::kRetrieval;
  }
  const std::size_t per_prompt = std::max<std::size_t>(1, opts.chunks_per_prompt);

  ElementExtraction out;
  for (ElementKind kind : {ElementKind::kRegister, ElementKind::kInstruction}) {
    std::vector<const Chunk*> pool;
    if (mode == ExtractionMode::kExhaustive) {
      pool = spec;
    } else {
      for (const auto& sc : kb.search(embedder, element_query(kind), opts.k_elements, DocKind::kDesignSpec)) {
        pool.push_back(sc.chunk);
      }
    }
    for (std::size_t i = 0; i < pool.size(); i += per_prompt) {
      std::vector<const Chunk*> batch(pool.begin() + i, pool.begin() + std::min(pool.size(), i + per_prompt));
      extract_from_batch(kind, batch, gateway, out);
    }
  }
  out.elements = dedup_elements(std::move(out.elements));
  for (const auto& w : out.warnings) spdlog::warn("{}", w);
  return out;
}

std::vector<DesignElement> dedup_elements(std::vector<DesignElement> elements) {
  std::map<ElementRef, DesignElement> merged;
  for (auto& el : elements) {
    el.norm_key = normalize_element_key(el.norm_key.empty() ? el.name : el.norm_key);
    auto [it, fresh] = merged.try_emplace(el.ref(), el);
    if (!fresh) {
      auto& refs = it->second.source_refs;
      refs.insert(refs.end(), el.source_refs.begin(), el.source_refs.end());
    }
    sort_unique(it->second.source_refs);
  }
  std::vector<DesignElement> out;
  for (auto& [ref, el] : merged) out.push_back(std::move(el));
  return out;
}

SnippetExtraction extract_isa_policies(const KnowledgeBase& kb, EmbeddingProvider& embedder,
                                       const std::vector<DesignElement>& elements, const Flow2Options& opts) {
  if (elements.empty()) throw Error(ErrorCode::kPreconditionFailed, "no design elements to look up");
  if (kb.chunks_of_kind(DocKind::kIsaManual).empty()) {
    throw Error(ErrorCode::kEmptyIsaIndex, "no instruction set manual is indexed");
  }
  SnippetExtraction out;
  for (const auto& el : elements) {
    std::string query = "policies, exceptions, access rules concerning " + el.name;
    std::size_t kept = 0;
    for (const auto& sc : kb.search(embedder, query, opts.k_isa, DocKind::kIsaManual)) {
      if (opts.require_mention && !mentions(sc.chunk->text, el.name)) continue;
      out.snippets.push_back({el.ref(), sc.hit.chunk_id, sc.chunk->text, sc.hit.score, sc.hit.rank});
      ++kept;
    }
    if (kept == 0) {
      out.warnings.push_back("no ISA passage found for " + std::string(to_string(el.kind)) + " " + el.name);
    }
  }
  for (const auto& w : out.warnings) spdlog::warn("{}", w);
  return out;
}

std::vector<std::pair<DesignElement, std::vector<RawPolicySnippet>>> plan_batches(
    const std::vector<DesignElement>& elements, const std::vector<RawPolicySnippet>& snippets) {
  std::vector<std::pair<DesignElement, std::vector<RawPolicySnippet>>> out;
  for (const auto& el : elements) {
    std::vector<RawPolicySnippet> mine;
    for (const auto& s : snippets) {
      if (s.element == el.ref()) mine.push_back(s);
    }
    if (!mine.empty()) out.emplace_back(el, std::move(mine));
  }
  return out;
}

PolicyBatch classify_batch(std::size_t batch_no, const DesignElement& element,
                           const std::vector<RawPolicySnippet>& snippets, Gateway& gateway) {
  PolicyBatch batch;
  batch.batch = batch_no;
  batch.element = element.ref();

  std::string passages;
  std::set<std::string> batch_sources;
  for (const auto& s : snippets) {
    passages += "[" + s.chunk_id + "]\n" + s.text + "\n\n";
    batch_sources.insert(s.chunk_id);
  }
  if (!passages.empty()) passages.pop_back();
  std::string vocabulary;
  for (RiskTag t : all_risk_tags()) vocabulary += "- " + std::string(to_string(t)) + "\n";
  vocabulary.pop_back();

  Bindings b{{"element_kind", std::string(to_string(element.kind))},
             {"element_name", element.name},
             {"risk_vocabulary", vocabulary},
             {"snippets", passages},
             {"schema_hint", std::string(schema_hint(Schema::kPolicyRecords))}};
  std::string prompt = render_prompt(assets::prompt_template("policy_classification"), b);

  json result;
  try {
    result = gateway.structured(prompt, Schema::kPolicyRecords);
  } catch (const Error& e) {
    if (!is_parse_failure(e)) throw;
    batch.failed = true;
    batch.error = e.what();
    spdlog::warn("policy batch {} ({}): {}", batch_no, element.name, e.what());
    return batch;
  }

  std::vector<SecurityPolicy> policies;
  for (const auto& rec : result.at("policies")) {
    SecurityPolicy p;
    p.statement = normalize_statement(rec.at("statement").get<std::string>());
    if (p.statement.empty() || p.statement == ".") continue;
    p.policy_id = policy_id_for(p.statement);
    p.security_relevance = text::trim(rec.value("relevance", std::string()));
    for (const auto& tag : rec.at("risk_tags")) {
      std::string raw = tag.get<std::string>();
      if (auto t = parse_risk_tag(raw)) {
        p.risk_tags.push_back(*t);
      } else {
        batch.warnings.push_back("unknown risk tag '" + raw + "' dropped from " + p.policy_id);
      }
    }
    sort_unique(p.risk_tags);
    if (p.risk_tags.empty()) {
      batch.warnings.push_back("policy without a recognised risk tag dropped: " + p.statement);
      continue;
    }
    for (const auto& src : rec.value("sources", json::array())) {
      std::string id = src.get<std::string>();
      if (batch_sources.count(id)) {
        p.source_refs.push_back(id);
      } else {
        batch.warnings.push_back("source " + id + " is not one of the batch passages; ignored");
      }
    }
    if (p.source_refs.empty()) p.source_refs.assign(batch_sources.begin(), batch_sources.end());
    sort_unique(p.source_refs);
    p.related_elements = {element.ref()};
    policies.push_back(std::move(p));
  }
  batch.policies = merge_policies(std::move(policies));
  for (const auto& w : batch.warnings) spdlog::warn("policy batch {}: {}", batch_no, w);
  return batch;
}

std::vector<PolicyBatch> classify_policies(const std::vector<DesignElement>& elements,
                                           const std::vector<RawPolicySnippet>& snippets, Gateway& gateway) {
  if (snippets.empty()) throw Error(ErrorCode::kPreconditionFailed, "no ISA passages to classify");
  std::vector<PolicyBatch> out;
  auto batches = plan_batches(elements, snippets);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    out.push_back(classify_batch(i, batches[i].first, batches[i].second, gateway));
  }
  return out;
}

std::vector<SecurityPolicy> merge_policies(std::vector<SecurityPolicy> policies) {
  std::map<std::string, SecurityPolicy> merged;
  for (auto& p : policies) {
    auto [it, fresh] = merged.try_emplace(p.policy_id, p);
    SecurityPolicy& m = it->second;
    if (!fresh) {
      m.related_elements.insert(m.related_elements.end(), p.related_elements.begin(), p.related_elements.end());
      m.risk_tags.insert(m.risk_tags.end(), p.risk_tags.begin(), p.risk_tags.end());
      m.source_refs.insert(m.source_refs.end(), p.source_refs.begin(), p.source_refs.end());
      if (m.security_relevance.empty()) m.security_relevance = p.security_relevance;
    }
    sort_unique(m.related_elements);
    sort_unique(m.risk_tags);
    sort_unique(m.source_refs);
  }
  std::vector<SecurityPolicy> out;
  for (auto& [id, p] : merged) out.push_back(std::move(p));
  return out;
}

void run_flow2(SessionWriter& w, Gateway& gateway, const KnowledgeBase& kb, EmbeddingProvider& embedder,
               const Flow2Options& opts) {
  if (w.state().flow != Flow::kSoftwareExploitable) {
    throw Error(ErrorCode::kInvalidPhase, "session " + w.state().session_id + " does not run policy mining");
  }
  if (w.state().phase == Phase::kSetup) {
    if (kb.chunks_of_kind(DocKind::kDesignSpec).empty()) {
      throw Error(ErrorCode::kEmptySpecIndex, "no design specification is indexed");
    }
    if (kb.chunks_of_kind(DocKind::kIsaManual).empty()) {
      throw Error(ErrorCode::kEmptyIsaIndex, "no instruction set manual is indexed");
    }
    change_phase(w, Phase::kPolicyMining);
  }
  if (w.state().phase != Phase::kPolicyMining) return;

  for (DocKind kind : {DocKind::kDesignSpec, DocKind::kIsaManual}) {
    for (const SourceDocument* d : kb.documents_of_kind(kind)) {
      const auto& corpus = w.state().corpus;
      bool bound = std::any_of(corpus.begin(), corpus.end(), [&](const CorpusRef& c) { return c.doc_id == d->doc_id; });
      if (!bound) {
        w.append(EventKind::kDocumentIngested, {{"doc_id", d->doc_id},
                                                {"kind", to_string(d->kind)},
                                                {"title", d->title},
                                                {"byte_length", d->byte_length}});
      }
    }
  }

  if (!w.state().elements) {
    ElementExtraction ex = extract_design_elements(kb, embedder, gateway, opts);
    w.append(EventKind::kElementsExtracted, {{"elements", ex.elements}, {"warnings", ex.warnings}});
  }
  const std::vector<DesignElement> elements = *w.state().elements;
  if (elements.empty()) {
    change_phase(w, Phase::kDegraded, "no design elements could be extracted");
    return;
  }

  if (!w.state().snippets) {
    SnippetExtraction ex = extract_isa_policies(kb, embedder, elements, opts);
    w.append(EventKind::kSnippetsExtracted, {{"snippets", ex.snippets}, {"warnings", ex.warnings}});
  }
  const std::vector<RawPolicySnippet> snippets = *w.state().snippets;
  if (snippets.empty()) {
    change_phase(w, Phase::kDegraded, "no ISA passages matched the design elements");
    return;
  }

  auto batches = plan_batches(elements, snippets);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    if (w.state().policy_batches.count(i)) continue;
    PolicyBatch b = classify_batch(i, batches[i].first, batches[i].second, gateway);
    json payload = {{"batch", b.batch},     {"element", b.element}, {"policies", b.policies},
                    {"failed", b.failed},   {"error", b.error},     {"warnings", b.warnings}};
    w.append(EventKind::kPolicyEmitted, payload);
  }

  bool any_ok = std::any_of(w.state().policy_batches.begin(), w.state().policy_batches.end(),
                            [](const auto& kv) { return !kv.second.failed; });
  if (!any_ok) {
    change_phase(w, Phase::kDegraded, "every classification batch failed");
    return;
  }
  change_phase(w, Phase::kCapabilityGathering);
}

std::vector<SecurityPolicy> session_policies(const SessionState& s) {
  std::vector<SecurityPolicy> all;
  for (const auto& [n, b] : s.policy_batches) all.insert(all.end(), b.policies.begin(), b.policies.end());
  return merge_policies(std::move(all));
}

json policy_list_document(const SessionState& s) {
  json spec = json::array(), isa = json::array();
  for (const auto& c : s.corpus) {
    json ref = {{"doc_id", c.doc_id}, {"title", c.title}};
    if (c.kind == DocKind::kDesignSpec) spec.push_back(ref);
    if (c.kind == DocKind::kIsaManual) isa.push_back(ref);
  }
  auto versions = assets::template_versions();
  std::vector<SecurityPolicy> policies = session_policies(s);

  json per_tag = json::object();
  for (RiskTag t : all_risk_tags()) per_tag[std::string(to_string(t))] = 0;
  json per_kind = {{"register", 0}, {"instruction", 0}};
  for (const auto& p : policies) {
    for (RiskTag t : p.risk_tags) per_tag[std::string(to_string(t))] = per_tag[std::string(to_string(t))].get<int>() + 1;
    std::set<ElementKind> kinds;
    for (const auto& e : p.related_elements) kinds.insert(e.kind);
    for (ElementKind k : kinds) per_kind[std::string(to_string(k))] = per_kind[std::string(to_string(k))].get<int>() + 1;
  }
  json elements_by_kind = {{"register", 0}, {"instruction", 0}};
  std::vector<DesignElement> elements = s.elements ? *s.elements : std::vector<DesignElement>{};
  for (const auto& e : elements) {
    std::string k(to_string(e.kind));
    elements_by_kind[k] = elements_by_kind[k].get<int>() + 1;
  }
  json failed = json::array();
  for (const auto& [n, b] : s.policy_batches) {
    if (b.failed) failed.push_back({{"batch", n}, {"element", b.element}, {"error", b.error}});
  }
  std::vector<std::string> warnings = s.warnings;
  for (const auto& [n, b] : s.policy_batches) warnings.insert(warnings.end(), b.warnings.begin(), b.warnings.end());

  return {{"schema", "hwthreat.policy_list"},
          {"schema_version", 1},
          {"flow", to_string(s.flow)},
          {"degraded", s.phase == Phase::kDegraded},
          {"metadata",
           {{"corpus", {{"design_spec", spec}, {"isa_manual", isa}}},
            {"template_versions",
             {{"element_extraction", versions.at("element_extraction")},
              {"policy_classification", versions.at("policy_classification")}}},
            {"model_name", s.model_name}}},
          {"summary",
           {{"policies", policies.size()},
            {"per_risk_tag", per_tag},
            {"per_element_kind", per_kind},
            {"elements", elements_by_kind},
            {"failed_batches", failed.size()}}},
          {"elements", elements},
          {"policies", policies},
          {"failed_batches", failed},
          {"warnings", warnings}};
}

}  // namespace hwthreat::policy
