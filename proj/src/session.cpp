#include "hwthreat/session.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "hwthreat/error.hpp"

namespace hwthreat {

using nlohmann::json;

namespace {

constexpr int kLogFormatVersion = 1;

const std::vector<std::pair<Phase, std::string_view>>& phase_names() {
  static const std::vector<std::pair<Phase, std::string_view>> names = {
      {Phase::kSetup, "setup"},
      {Phase::kKnowledgeExtraction, "knowledge_extraction"},
      {Phase::kInterrogation, "interrogation"},
      {Phase::kAssessment, "assessment"},
      {Phase::kPolicyMining, "policy_mining"},
      {Phase::kCapabilityGathering, "capability_gathering"},
      {Phase::kPlanGeneration, "plan_generation"},
      {Phase::kFinalized, "finalized"},
      {Phase::kDegraded, "degraded"}};
  return names;
}

const std::vector<std::pair<EventKind, std::string_view>>& event_names() {
  static const std::vector<std::pair<EventKind, std::string_view>> names = {
      {EventKind::kDocumentIngested, "document_ingested"},
      {EventKind::kQueryPresented, "query_presented"},
      {EventKind::kAnswerRecorded, "answer_recorded"},
      {EventKind::kLlmExchange, "llm_exchange"},
      {EventKind::kThreatUpdated, "threat_updated"},
      {EventKind::kPolicyEmitted, "policy_emitted"},
      {EventKind::kBankUpdated, "bank_updated"},
      {EventKind::kPlanEmitted, "plan_emitted"},
      {EventKind::kPhaseChanged, "phase_changed"},
      {EventKind::kElementsExtracted, "elements_extracted"},
      {EventKind::kSnippetsExtracted, "snippets_extracted"}};
  return names;
}

[[noreturn]] void reject(const std::string& why) { throw Error(ErrorCode::kPreconditionFailed, why); }

BankId bank_of(const json& payload) {
  std::string b = payload.at("bank").get<std::string>();
  if (b == "threat") return BankId::kThreat;
  if (b == "capability") return BankId::kCapability;
  reject("unknown bank " + b);
}

void set_phase(SessionState& s, Phase to) {
  if (!transition_allowed(s.flow, s.phase, to)) {
    reject("illegal phase transition " + std::string(to_string(s.phase)) + " -> " + std::string(to_string(to)));
  }
  s.phase = to;
}

void apply_threat_update(SessionState& s, const json& p) {
  auto t = p.at("threat").get<ThreatAssessment>();
  if (auto it = s.threats.find(t.category_id); it != s.threats.end()) {
    if (it->second.status == ThreatStatus::kPruned && t.status != ThreatStatus::kPruned) {
      reject("threat " + t.category_id + " is pruned and cannot change status");
    }
  }
  if (t.status != ThreatStatus::kCandidate && t.rationale.empty()) {
    reject("threat " + t.category_id + " decided without a rationale");
  }
  if (p.contains("evidence")) s.evidence[t.category_id] = p["evidence"].get<EvidenceBundle>();
  s.threats[t.category_id] = std::move(t);
}

void apply_bank_update(SessionState& s, const json& p) {
  BankId id = bank_of(p);
  QueryBank& bank = s.bank(id);
  std::string action = p.at("action").get<std::string>();
  if (action == "init") {
    if (bank.initialized) reject("query bank already initialized");
    bank.queries = p.at("queries").get<std::vector<Query>>();
    for (auto& q : bank.queries) q.status = QueryStatus::kActive;
    bank.initialized = true;
  } else if (action == "refine") {
    if (id != BankId::kThreat) reject("only the threat bank is refined");
    if (s.phase != Phase::kAssessment) reject("refinement outside the assessment phase");
    int iteration = p.at("iteration").get<int>();
    if (iteration != s.iteration()) reject("refinement for a different iteration");
    for (const auto& r : p.at("removed")) {
      Query* q = bank.find(r.at("query_id").get<std::string>());
      if (!q || q->status != QueryStatus::kActive) reject("only active queries can be removed");
      q->status = QueryStatus::kRemoved;
      q->removal_reason = r.value("reason", std::string());
    }
    for (const auto& w : p.value("warnings", json::array())) s.warnings.push_back(w.get<std::string>());
    s.refined_through = iteration;
    set_phase(s, Phase::kInterrogation);
  } else {
    reject("unknown bank action " + action);
  }
}

void apply_presented(SessionState& s, const json& p) {
  QueryBank& bank = s.bank(bank_of(p));
  std::string qid = p.at("query_id").get<std::string>();
  if (bank.presented) reject("a query is already awaiting its answer");
  const Query* q = bank.find(qid);
  if (!q || q->status != QueryStatus::kActive) reject("only active queries can be presented");
  bank.presented = qid;
}

void apply_answer(SessionState& s, const Event& e) {
  const json& p = e.payload;
  BankId id = bank_of(p);
  QueryBank& bank = s.bank(id);
  std::string qid = p.at("query_id").get<std::string>();
  if (bank.presented != qid) reject("answer for a query that is not presented");
  Query* q = bank.find(qid);
  q->status = QueryStatus::kAsked;
  bank.presented.reset();
  TranscriptEntry entry{qid, q->text, p.at("answer").get<std::string>(), e.timestamp_ms};
  if (id == BankId::kThreat) {
    s.transcript.push_back(std::move(entry));
    if (p.value("assess", true)) set_phase(s, Phase::kAssessment);
  } else {
    s.capability_transcript.push_back(std::move(entry));
  }
}

void apply_policy_batch(SessionState& s, const json& p) {
  PolicyBatch b;
  b.batch = p.at("batch").get<std::size_t>();
  b.element = p.at("element").get<ElementRef>();
  b.policies = p.at("policies").get<std::vector<SecurityPolicy>>();
  b.failed = p.value("failed", false);
  b.error = p.value("error", std::string());
  b.warnings = p.value("warnings", std::vector<std::string>());
  if (s.policy_batches.count(b.batch)) reject("policy batch recorded twice");
  s.policy_batches.emplace(b.batch, std::move(b));
}

}  // namespace

std::string_view to_string(Phase p) {
  for (const auto& [k, v] : phase_names()) {
    if (k == p) return v;
  }
  return "setup";
}

std::optional<Phase> parse_phase(std::string_view s) {
  for (const auto& [k, v] : phase_names()) {
    if (v == s) return k;
  }
  return std::nullopt;
}

bool is_terminal(Phase p) { return p == Phase::kFinalized || p == Phase::kDegraded; }

bool transition_allowed(Flow flow, Phase from, Phase to) {
  if (is_terminal(from)) return false;
  if (to == Phase::kDegraded) return true;
  if (flow == Flow::kPhysicalSupplyChain) {
    switch (from) {
      case Phase::kSetup: return to == Phase::kKnowledgeExtraction;
      case Phase::kKnowledgeExtraction: return to == Phase::kInterrogation;
      case Phase::kInterrogation: return to == Phase::kAssessment || to == Phase::kCapabilityGathering;
      case Phase::kAssessment: return to == Phase::kInterrogation;
      case Phase::kCapabilityGathering: return to == Phase::kPlanGeneration;
      case Phase::kPlanGeneration: return to == Phase::kFinalized;
      default: return false;
    }
  }
  switch (from) {
    case Phase::kSetup: return to == Phase::kPolicyMining;
    case Phase::kPolicyMining: return to == Phase::kCapabilityGathering;
    case Phase::kCapabilityGathering: return to == Phase::kPlanGeneration;
    case Phase::kPlanGeneration: return to == Phase::kFinalized;
    default: return false;
  }
}

std::string_view to_string(EventKind k) {
  for (const auto& [kind, name] : event_names()) {
    if (kind == k) return name;
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (const auto& [kind, name] : event_names()) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(BankId b) { return b == BankId::kThreat ? "threat" : "capability"; }

void apply_event(SessionState& s, const Event& e) {
  if (e.seq != s.last_seq + 1) reject("event sequence gap");
  if (is_terminal(s.phase)) reject("session is terminal");
  const json& p = e.payload;
  switch (e.kind) {
    case EventKind::kPhaseChanged: {
      auto from = parse_phase(p.at("from").get<std::string>());
      auto to = parse_phase(p.at("to").get<std::string>());
      if (!from || !to || *from != s.phase) reject("phase change does not start from the current phase");
      set_phase(s, *to);
      break;
    }
    case EventKind::kDocumentIngested: {
      auto kind = parse_doc_kind(p.at("kind").get<std::string>());
      if (!kind) reject("unknown document kind");
      CorpusRef ref{p.at("doc_id").get<std::string>(), *kind, p.at("title").get<std::string>(),
                    p.at("byte_length").get<std::size_t>()};
      for (const auto& c : s.corpus) {
        if (c.doc_id == ref.doc_id) reject("document already bound to session");
      }
      s.corpus.push_back(std::move(ref));
      break;
    }
    case EventKind::kThreatUpdated: apply_threat_update(s, p); break;
    case EventKind::kBankUpdated: apply_bank_update(s, p); break;
    case EventKind::kQueryPresented: apply_presented(s, p); break;
    case EventKind::kAnswerRecorded: apply_answer(s, e); break;
    case EventKind::kLlmExchange: s.model_name = p.at("provider").get<std::string>(); break;
    case EventKind::kElementsExtracted:
      if (s.elements) reject("design elements already extracted");
      s.elements = p.at("elements").get<std::vector<DesignElement>>();
      for (const auto& w : p.value("warnings", json::array())) s.warnings.push_back(w.get<std::string>());
      break;
    case EventKind::kSnippetsExtracted:
      if (!s.elements || s.snippets) reject("snippets out of order");
      s.snippets = p.at("snippets").get<std::vector<RawPolicySnippet>>();
      for (const auto& w : p.value("warnings", json::array())) s.warnings.push_back(w.get<std::string>());
      break;
    case EventKind::kPolicyEmitted: apply_policy_batch(s, p); break;
    case EventKind::kPlanEmitted:
      if (s.phase != Phase::kPlanGeneration) reject("plan emitted outside plan generation");
      s.plan = p.at("plan").get<TestPlan>();
      break;
  }
  s.last_seq = e.seq;
}

json to_json(const Event& e) {
  return {{"v", kLogFormatVersion},
          {"seq", e.seq},
          {"ts", e.timestamp_ms},
          {"kind", to_string(e.kind)},
          {"payload", e.payload}};
}

Event event_from_json(const json& j) {
  if (j.value("v", 0) != kLogFormatVersion) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported event format version");
  }
  auto kind = parse_event_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::kInvalidArgument, "unknown event kind");
  return {j.at("seq").get<std::uint64_t>(), *kind, j.at("ts").get<std::int64_t>(), j.at("payload")};
}

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// ---- SessionWriter ------------------------------------------------------------

SessionWriter::SessionWriter(const SessionStore& store, std::filesystem::path dir, SessionState state,
                             std::vector<Event> events, int lock_fd)
    : store_(&store), dir_(std::move(dir)), state_(std::move(state)), events_(std::move(events)),
      lock_fd_(lock_fd) {}

SessionWriter::SessionWriter(SessionWriter&& other) noexcept
    : store_(other.store_), dir_(std::move(other.dir_)), state_(std::move(other.state_)),
      events_(std::move(other.events_)), lock_fd_(other.lock_fd_) {
  other.lock_fd_ = -1;
}

SessionWriter::~SessionWriter() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

const Event& SessionWriter::append(EventKind kind, json payload) {
  if (is_terminal(state_.phase)) {
    throw Error(ErrorCode::kTerminalSession,
                "session " + state_.session_id + " is " + std::string(to_string(state_.phase)));
  }
  Event e{state_.last_seq + 1, kind, store_->clock_(), std::move(payload)};
  SessionState next = state_;
  apply_event(next, e);

  std::string line = to_json(e).dump() + "\n";
  std::filesystem::path log = dir_ / "events.jsonl";
  int fd = ::open(log.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kStorageFailure, "cannot open " + log.string());
  std::size_t written = 0;
  while (written < line.size()) {
    ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorCode::kStorageFailure, "write to " + log.string() + " failed");
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw Error(ErrorCode::kStorageFailure, "fsync of " + log.string() + " failed");
  }
  ::close(fd);

  state_ = std::move(next);
  events_.push_back(std::move(e));
  if (store_->after_append_) store_->after_append_(events_.back());
  return events_.back();
}

// ---- SessionStore ---------------------------------------------------------------

SessionStore::SessionStore(std::filesystem::path root, Clock clock)
    : root_(std::move(root)), clock_(std::move(clock)) {
  std::filesystem::create_directories(root_);
}

SessionState SessionStore::create(Flow flow) {
  static std::mt19937_64 rng{std::random_device{}()};
  std::string id;
  do {
    std::ostringstream os;
    os << "s-" << std::hex << (rng() & 0xFFFFFFFFFFFFULL);
    id = os.str();
  } while (exists(id));

  std::filesystem::path dir = session_dir(id);
  std::filesystem::create_directories(dir / "artifacts");
  json header = {{"session_id", id}, {"flow", to_string(flow)}, {"created_ms", clock_()},
                 {"format_version", kLogFormatVersion}};
  std::filesystem::path tmp = dir / "session.json.tmp";
  {
    std::ofstream out(tmp);
    out << header.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::kStorageFailure, "cannot write session header");
  }
  std::filesystem::rename(tmp, dir / "session.json");
  std::ofstream(dir / "events.jsonl", std::ios::app);

  SessionState s;
  s.session_id = id;
  s.flow = flow;
  return s;
}

bool SessionStore::exists(const std::string& id) const {
  if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos) return false;
  return std::filesystem::exists(session_dir(id) / "session.json");
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(root_)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "session.json")) {
      out.push_back(entry.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

SessionState SessionStore::header(const std::string& id) const {
  if (!exists(id)) throw Error(ErrorCode::kUnknownSession, "unknown session: " + id, {{"session_id", id}});
  std::ifstream in(session_dir(id) / "session.json");
  json h = json::parse(in, nullptr, false);
  if (h.is_discarded()) throw Error(ErrorCode::kCorruptLog, "session header is unreadable", {{"seq", 0}});
  auto flow = parse_flow(h.value("flow", std::string()));
  if (!flow) throw Error(ErrorCode::kCorruptLog, "session header has an unknown flow", {{"seq", 0}});
  SessionState s;
  s.session_id = id;
  s.flow = *flow;
  return s;
}

std::vector<Event> SessionStore::read_log(const std::string& id) const {
  header(id);
  std::ifstream in(session_dir(id) / "events.jsonl", std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<Event> events;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::uint64_t expected = events.size() + 1;
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      throw Error(ErrorCode::kCorruptLog, "event log is truncated", {{"seq", expected}, {"session_id", id}});
    }
    json j = json::parse(std::string_view(content).substr(pos, nl - pos), nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorCode::kCorruptLog, "event log line is not valid JSON", {{"seq", expected}, {"session_id", id}});
    }
    try {
      Event e = event_from_json(j);
      if (e.seq != expected) {
        throw Error(ErrorCode::kCorruptLog, "event sequence gap", {{"seq", expected}, {"session_id", id}});
      }
      events.push_back(std::move(e));
    } catch (const Error& err) {
      if (err.code() == ErrorCode::kCorruptLog) throw;
      throw Error(ErrorCode::kCorruptLog, err.what(), {{"seq", expected}, {"session_id", id}});
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kCorruptLog, ex.what(), {{"seq", expected}, {"session_id", id}});
    }
    pos = nl + 1;
  }
  return events;
}

SessionState SessionStore::load(const std::string& id) const {
  SessionState s = header(id);
  for (const Event& e : read_log(id)) {
    try {
      apply_event(s, e);
    } catch (const std::exception& ex) {
      throw Error(ErrorCode::kCorruptLog, std::string("event violates session invariants: ") + ex.what(),
                  {{"seq", e.seq}, {"session_id", id}});
    }
  }
  return s;
}

SessionWriter SessionStore::open_writer(const std::string& id) const {
  header(id);
  std::filesystem::path lock = session_dir(id) / "lock";
  int fd = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kStorageFailure, "cannot open lock file " + lock.string());
  if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd);
    throw Error(ErrorCode::kSessionBusy, "session " + id + " is being modified by another writer",
                {{"session_id", id}});
  }
  try {
    std::vector<Event> events = read_log(id);
    SessionState s = header(id);
    for (const Event& e : events) {
      try {
        apply_event(s, e);
      } catch (const std::exception& ex) {
        throw Error(ErrorCode::kCorruptLog, std::string("event violates session invariants: ") + ex.what(),
                    {{"seq", e.seq}, {"session_id", id}});
      }
    }
    return SessionWriter(*this, session_dir(id), std::move(s), std::move(events), fd);
  } catch (...) {
    ::flock(fd, LOCK_UN);
    ::close(fd);
    throw;
  }
}

}  // namespace hwthreat
