#include "hwthreat/engine.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <thread>

#include "hwthreat/assets.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/mock_provider.hpp"
#include "hwthreat/openai_provider.hpp"

namespace hwthreat {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<ChatProvider> make_chat(const Workspace& ws, const EngineConfig& cfg) {
  if (cfg.provider_kind == "openai") return std::make_shared<OpenAiChatProvider>(cfg.provider);
  if (cfg.mock_script.empty()) return std::make_shared<MockProvider>(std::vector<MockRule>{});
  return std::make_shared<MockProvider>(MockProvider::from_file(ws.resolve(cfg.mock_script)));
}

std::shared_ptr<EmbeddingProvider> make_embedder(const EngineConfig& cfg) {
  if (cfg.embedding_kind == "openai") {
    ProviderConfig p = cfg.provider;
    p.model_name = cfg.embedding_model;
    return std::make_shared<OpenAiEmbedder>(p, cfg.embedding_dim);
  }
  return std::make_shared<HashingEmbedder>(cfg.embedding_dim);
}

std::string embedder_id(const EngineConfig& cfg) {
  return cfg.embedding_kind == "openai" ? "openai:" + cfg.embedding_model : "hashing";
}

// Exchanges logged after the last state-changing event: their effect was
// never recorded, so a resumed run answers the same prompts from them.
std::vector<ChatExchange> orphaned_exchanges(const std::vector<Event>& events) {
  std::vector<ChatExchange> out;
  for (auto it = events.rbegin(); it != events.rend() && it->kind == EventKind::kLlmExchange; ++it) {
    const json& p = it->payload;
    out.push_back({p.at("prompt").get<std::string>(), p.at("response").get<std::string>(),
                   p.value("provider", std::string()), std::chrono::milliseconds(p.value("latency_ms", 0)),
                   p.value("attempt", 1)});
  }
  std::reverse(out.begin(), out.end());
  return out;
}

json load_json_file(const fs::path& p) {
  json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "not valid JSON: " + p.string());
  return j;
}

}  // namespace

json to_json(const PresentedQuery& q) {
  return {{"bank", to_string(q.bank)},
          {"query_id", q.query.query_id},
          {"text", q.query.text},
          {"mandatory", q.query.mandatory}};
}

Engine::Engine(fs::path workspace)
    : ws_(workspace), cfg_(load_config(ws_.config_path())), store_(ws_.sessions_dir()) {
  chat_ = make_chat(ws_, cfg_);
  embedder_ = make_embedder(cfg_);
}

Engine::Engine(fs::path workspace, EngineConfig config, std::shared_ptr<ChatProvider> chat,
               std::shared_ptr<EmbeddingProvider> embedder)
    : ws_(workspace), cfg_(std::move(config)), store_(ws_.sessions_dir()), chat_(std::move(chat)),
      embedder_(std::move(embedder)) {}

template <typename F>
auto Engine::with_session(const std::string& id, F&& f) {
  SessionWriter w = store_.open_writer(id);
  Gateway gw(*chat_, cfg_.provider);
  gw.set_sink([&w](const ChatExchange& x) { w.append(EventKind::kLlmExchange, to_json(x)); });
  gw.preload_replay(orphaned_exchanges(w.events()));
  if constexpr (std::is_void_v<decltype(f(w, gw))>) {
    try {
      f(w, gw);
    } catch (...) {
      write_artifacts(w.state());
      throw;
    }
    write_artifacts(w.state());
  } else {
    try {
      auto r = f(w, gw);
      write_artifacts(w.state());
      return r;
    } catch (...) {
      write_artifacts(w.state());
      throw;
    }
  }
}

const KnowledgeBase& Engine::knowledge() {
  std::lock_guard lock(kb_mu_);
  if (!kb_) kb_ = std::make_unique<KnowledgeBase>(ws_.load_knowledge());
  return *kb_;
}

threat::Flow1Options Engine::flow1_options() const {
  threat::Flow1Options o;
  o.k = cfg_.k;
  o.reassess_retained = cfg_.reassess_retained;
  o.answers_per_round = cfg_.answers_per_round;
  if (!cfg_.catalog_file.empty()) o.catalog = parse_catalog(load_json_file(ws_.resolve(cfg_.catalog_file)));
  if (!cfg_.query_bank_file.empty()) {
    o.query_bank = parse_query_list(load_json_file(ws_.resolve(cfg_.query_bank_file)));
  }
  o.issue_order = issue_order_;
  return o;
}

plan::PlanOptions Engine::plan_options() const {
  plan::PlanOptions o;
  if (!cfg_.guidance_file.empty()) o.guidance = read_file(ws_.resolve(cfg_.guidance_file));
  if (!cfg_.capability_queries_file.empty()) {
    o.capability_queries = parse_query_list(load_json_file(ws_.resolve(cfg_.capability_queries_file)));
  }
  return o;
}

void Engine::write_artifacts(const SessionState& s) const {
  fs::path dir = ws_.artifacts_dir(s.session_id);
  if (s.flow == Flow::kPhysicalSupplyChain && !s.threats.empty()) {
    write_file_atomic(dir / "threat_list.json", threat::threat_list_document(s).dump(2) + "\n");
  }
  if (s.flow == Flow::kSoftwareExploitable && s.elements) {
    write_file_atomic(dir / "policy_list.json", policy::policy_list_document(s).dump(2) + "\n");
  }
  if (s.plan) {
    write_file_atomic(dir / "test_plan.json", plan::export_plan(*s.plan, plan::ExportFormat::kStructuredJson));
    write_file_atomic(dir / "test_plan.md", plan::export_plan(*s.plan, plan::ExportFormat::kMarkdown));
  }
}

SourceDocument Engine::ingest(std::string_view bytes, DocKind kind, std::string title) {
  SourceDocument d = ws_.add_document(bytes, kind, std::move(title));
  std::lock_guard lock(kb_mu_);
  kb_.reset();
  return d;
}

json Engine::build_index() {
  json m = ws_.build_index(*embedder_, cfg_.chunking, embedder_id(cfg_));
  std::lock_guard lock(kb_mu_);
  kb_.reset();
  return m;
}

SessionState Engine::create_session(Flow flow) {
  SessionState s = store_.create(flow);
  ws_.set_current_session(s.session_id);
  return s;
}

SessionState Engine::load(const std::string& id) const {
  // A reader can observe a log line that is still being appended; retry
  // briefly before reporting corruption.
  for (int attempt = 0;; ++attempt) {
    try {
      return store_.load(id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kCorruptLog || attempt >= 3) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
}

std::string Engine::resolve_session(const std::optional<std::string>& id) const {
  if (id && !id->empty()) return *id;
  auto cur = ws_.current_session();
  if (!cur) throw Error(ErrorCode::kUnknownSession, "no session given and no current session; run session new");
  return *cur;
}

json Engine::summary(const std::string& id) const {
  SessionState s = load(id);
  json pending = nullptr;
  for (BankId b : {BankId::kThreat, BankId::kCapability}) {
    if (auto q = hwthreat::pending_query(s, b)) pending = to_json(PresentedQuery{b, *q});
  }
  json threats = json::object();
  for (const auto& [cid, t] : s.threats) threats[cid] = to_string(t.status);
  json artifacts = json::array();
  fs::path dir = ws_.artifacts_dir(id);
  if (fs::exists(dir)) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() != ".tmp") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (auto& n : names) artifacts.push_back(n);
  }
  return {{"session_id", s.session_id},
          {"flow", to_string(s.flow)},
          {"phase", to_string(s.phase)},
          {"last_seq", s.last_seq},
          {"iteration", s.iteration()},
          {"pending_query", pending},
          {"threats", threats},
          {"elements", s.elements ? s.elements->size() : 0},
          {"policy_batches", s.policy_batches.size()},
          {"capability_answers", s.capability_transcript.size()},
          {"plan_id", s.plan ? json(s.plan->plan_id) : json(nullptr)},
          {"artifacts", artifacts},
          {"warnings", s.warnings}};
}

json Engine::list_sessions() const {
  json out = json::array();
  for (const auto& id : store_.list()) {
    try {
      SessionState s = load(id);
      out.push_back({{"session_id", id}, {"flow", to_string(s.flow)}, {"phase", to_string(s.phase)}});
    } catch (const Error& e) {
      out.push_back({{"session_id", id}, {"error", error_code_name(e.code())}});
    }
  }
  return out;
}

std::optional<PresentedQuery> Engine::pending_query(const std::string& id) const {
  SessionState s = load(id);
  for (BankId b : {BankId::kThreat, BankId::kCapability}) {
    if (auto q = hwthreat::pending_query(s, b)) return PresentedQuery{b, *q};
  }
  return std::nullopt;
}

std::optional<PresentedQuery> Engine::next_query(const std::string& id) {
  SessionState peek = load(id);
  const KnowledgeBase* kb = nullptr;
  if (peek.flow == Flow::kPhysicalSupplyChain &&
      (peek.phase == Phase::kSetup || peek.phase == Phase::kKnowledgeExtraction)) {
    kb = &knowledge();
  }
  auto opts = flow1_options();
  auto popts = plan_options();
  return with_session(id, [&](SessionWriter& w, Gateway& gw) -> std::optional<PresentedQuery> {
    if (w.state().flow == Flow::kPhysicalSupplyChain) {
      if (kb) threat::begin(w, *kb, *embedder_, opts);
      threat::advance(w, gw, opts);
      if (w.state().phase == Phase::kInterrogation) {
        if (auto q = threat::next_query(w)) return PresentedQuery{BankId::kThreat, *q};
        threat::finish_interrogation(w);
      }
    }
    if (w.state().phase == Phase::kCapabilityGathering) {
      if (auto q = plan::next_capability_query(w, popts)) return PresentedQuery{BankId::kCapability, *q};
      return std::nullopt;
    }
    if (w.state().phase == Phase::kSetup || w.state().phase == Phase::kPolicyMining) {
      throw Error(ErrorCode::kInvalidPhase, "policy mining has not run yet; run flow2 first",
                  {{"phase", to_string(w.state().phase)}});
    }
    return std::nullopt;
  });
}

void Engine::answer(const std::string& id, const std::string& query_id, const std::string& text,
                    bool run_assessment) {
  auto opts = flow1_options();
  with_session(id, [&](SessionWriter& w, Gateway& gw) {
    Phase phase = w.state().phase;
    if (phase == Phase::kInterrogation) {
      threat::submit_answer(w, query_id, text, opts);
      if (run_assessment) threat::advance(w, gw, opts);
    } else if (phase == Phase::kCapabilityGathering) {
      plan::submit_capability_answer(w, query_id, text);
    } else {
      throw Error(ErrorCode::kNotPresented, "no query is awaiting an answer in phase " + std::string(to_string(phase)),
                  {{"query_id", query_id}, {"phase", to_string(phase)}});
    }
  });
}

void Engine::advance(const std::string& id) {
  auto opts = flow1_options();
  with_session(id, [&](SessionWriter& w, Gateway& gw) { threat::advance(w, gw, opts); });
}

json Engine::run_flow1(const std::string& id, AnswerSource& answers) {
  SessionState peek = load(id);
  if (peek.flow != Flow::kPhysicalSupplyChain) {
    throw Error(ErrorCode::kInvalidPhase, "session " + id + " is not a physical_supply_chain session");
  }
  const KnowledgeBase* kb = nullptr;
  if (peek.phase == Phase::kSetup || peek.phase == Phase::kKnowledgeExtraction) kb = &knowledge();
  auto opts = flow1_options();
  return with_session(id, [&](SessionWriter& w, Gateway& gw) {
    if (auto* scripted = dynamic_cast<ScriptedAnswers*>(&answers)) scripted->prime(w.state());
    if (kb) {
      threat::run_flow1(w, gw, *kb, *embedder_, answers, opts);
    } else {
      threat::continue_flow1(w, gw, answers, opts);
    }
    return threat::threat_list_document(w.state());
  });
}

json Engine::run_flow2(const std::string& id) {
  SessionState peek = load(id);
  if (peek.flow != Flow::kSoftwareExploitable) {
    throw Error(ErrorCode::kInvalidPhase, "session " + id + " is not a software_exploitable session");
  }
  const KnowledgeBase& kb = knowledge();
  return with_session(id, [&](SessionWriter& w, Gateway& gw) {
    policy::run_flow2(w, gw, kb, *embedder_, cfg_.flow2);
    return policy::policy_list_document(w.state());
  });
}

VerificationCapabilities Engine::gather_capabilities(const std::string& id, AnswerSource& answers) {
  auto popts = plan_options();
  return with_session(id, [&](SessionWriter& w, Gateway&) {
    if (auto* scripted = dynamic_cast<ScriptedAnswers*>(&answers)) scripted->prime(w.state());
    return plan::gather_capabilities(w, answers, popts);
  });
}

TestPlan Engine::generate_plan(const std::string& id, AnswerSource* answers) {
  auto popts = plan_options();
  return with_session(id, [&](SessionWriter& w, Gateway& gw) {
    if (answers && w.state().phase == Phase::kCapabilityGathering) {
      if (auto* scripted = dynamic_cast<ScriptedAnswers*>(answers)) scripted->prime(w.state());
      plan::gather_capabilities(w, *answers, popts);
    }
    return plan::run_plan(w, gw, popts);
  });
}

json Engine::threats(const std::string& id) const {
  SessionState s = load(id);
  if (s.flow != Flow::kPhysicalSupplyChain) throw Error(ErrorCode::kNotFound, "session has no threat list");
  return threat::threat_list_document(s);
}

json Engine::policies(const std::string& id) const {
  SessionState s = load(id);
  if (s.flow != Flow::kSoftwareExploitable) throw Error(ErrorCode::kNotFound, "session has no policy list");
  return policy::policy_list_document(s);
}

std::string Engine::export_artifact(const std::string& id, const std::string& name, const std::string& format) const {
  if (format != "json" && format != "markdown") {
    throw Error(ErrorCode::kInvalidArgument, "format must be json or markdown", {{"format", format}});
  }
  SessionState s = load(id);
  bool md = format == "markdown";
  if (name == "test_plan") {
    if (!s.plan) throw Error(ErrorCode::kNotFound, "session " + id + " has no test plan yet");
    return plan::export_plan(*s.plan, md ? plan::ExportFormat::kMarkdown : plan::ExportFormat::kStructuredJson);
  }
  if (name == "threat_list") {
    if (s.flow != Flow::kPhysicalSupplyChain || s.threats.empty()) {
      throw Error(ErrorCode::kNotFound, "session " + id + " has no threat list yet");
    }
    json doc = threat::threat_list_document(s);
    return md ? threat_list_markdown(doc) : doc.dump(2) + "\n";
  }
  if (name == "policy_list") {
    if (s.flow != Flow::kSoftwareExploitable || !s.elements) {
      throw Error(ErrorCode::kNotFound, "session " + id + " has no policy list yet");
    }
    json doc = policy::policy_list_document(s);
    return md ? policy_list_markdown(doc) : doc.dump(2) + "\n";
  }
  throw Error(ErrorCode::kNotFound, "unknown artifact " + name, {{"artifact", name}});
}

std::string threat_list_markdown(const json& doc) {
  std::string md = "# Threat List\n\n";
  const json& sum = doc.at("summary");
  md += "- Retained: " + sum.at("retained").dump() + "\n- Pruned: " + sum.at("pruned").dump() +
        "\n- Undecided: " + sum.at("candidate").dump() + "\n- Interview answers: " + sum.at("iterations").dump() +
        "\n\n";
  for (const auto& t : doc.at("threats")) {
    md += "## " + t.at("label").get<std::string>() + " (" + t.at("category_id").get<std::string>() + ")\n\n";
    md += "Status: " + t.at("status").get<std::string>() + "\n\n";
    if (!t.at("rationale").get<std::string>().empty()) md += t.at("rationale").get<std::string>() + "\n\n";
    if (!t.value("flag", std::string()).empty()) md += "Note: " + t.at("flag").get<std::string>() + "\n\n";
  }
  md.pop_back();
  return md;
}

std::string policy_list_markdown(const json& doc) {
  std::string md = "# Security Policy List\n\n";
  if (doc.at("degraded").get<bool>()) md += "The run was degraded; the list may be incomplete.\n\n";
  md += "- Policies: " + doc.at("summary").at("policies").dump() + "\n- Design elements: " +
        std::to_string(doc.at("elements").size()) + "\n\n";
  for (const auto& p : doc.at("policies")) {
    md += "## " + p.at("policy_id").get<std::string>() + "\n\n" + p.at("statement").get<std::string>() + "\n\n";
    std::string tags;
    for (const auto& t : p.at("risk_tags")) tags += (tags.empty() ? "" : ", ") + t.get<std::string>();
    md += "- Risks: " + tags + "\n";
    std::string els;
    for (const auto& e : p.at("related_elements")) {
      els += (els.empty() ? "" : ", ") + e.at("kind").get<std::string>() + " " + e.at("norm_key").get<std::string>();
    }
    md += "- Elements: " + els + "\n";
    if (!p.at("security_relevance").get<std::string>().empty()) {
      md += "- Relevance: " + p.at("security_relevance").get<std::string>() + "\n";
    }
    md += "\n";
  }
  md.pop_back();
  return md;
}

}  // namespace hwthreat
