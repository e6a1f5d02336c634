#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/domain.hpp"

namespace hwthreat {

enum class Phase {
  kSetup,
  kKnowledgeExtraction,
  kInterrogation,
  kAssessment,
  kPolicyMining,
  kCapabilityGathering,
  kPlanGeneration,
  kFinalized,
  kDegraded,
};
std::string_view to_string(Phase p);
std::optional<Phase> parse_phase(std::string_view s);
bool is_terminal(Phase p);
bool transition_allowed(Flow flow, Phase from, Phase to);

enum class EventKind {
  kDocumentIngested,
  kQueryPresented,
  kAnswerRecorded,
  kLlmExchange,
  kThreatUpdated,
  kPolicyEmitted,
  kBankUpdated,
  kPlanEmitted,
  kPhaseChanged,
  kElementsExtracted,
  kSnippetsExtracted,
};
std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

struct Event {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kPhaseChanged;
  std::int64_t timestamp_ms = 0;
  nlohmann::json payload;

  bool operator==(const Event&) const = default;
};

enum class BankId { kThreat, kCapability };
std::string_view to_string(BankId b);

struct CorpusRef {
  std::string doc_id;
  DocKind kind = DocKind::kDesignSpec;
  std::string title;
  std::size_t byte_length = 0;

  bool operator==(const CorpusRef&) const = default;
};

// Outcome of classifying one element's snippets.
struct PolicyBatch {
  std::size_t batch = 0;
  ElementRef element;
  std::vector<SecurityPolicy> policies;
  bool failed = false;
  std::string error;
  std::vector<std::string> warnings;

  bool operator==(const PolicyBatch&) const = default;
};

// Everything a session knows. Always equal to the fold of its event log.
struct SessionState {
  std::string session_id;
  Flow flow = Flow::kPhysicalSupplyChain;
  Phase phase = Phase::kSetup;
  std::uint64_t last_seq = 0;
  std::vector<CorpusRef> corpus;
  std::string model_name;
  std::vector<std::string> warnings;

  // Threat identification
  std::map<std::string, EvidenceBundle> evidence;
  std::map<std::string, ThreatAssessment> threats;
  QueryBank threat_bank;
  std::vector<TranscriptEntry> transcript;
  int refined_through = 0;

  // Policy mining
  std::optional<std::vector<DesignElement>> elements;
  std::optional<std::vector<RawPolicySnippet>> snippets;
  std::map<std::size_t, PolicyBatch> policy_batches;

  // Test planning
  QueryBank capability_bank;
  std::vector<TranscriptEntry> capability_transcript;
  std::optional<TestPlan> plan;

  // Iteration ordinal of the threat interview: number of answers recorded.
  int iteration() const { return static_cast<int>(transcript.size()); }
  QueryBank& bank(BankId id) { return id == BankId::kThreat ? threat_bank : capability_bank; }
  const QueryBank& bank(BankId id) const { return id == BankId::kThreat ? threat_bank : capability_bank; }

  bool operator==(const SessionState&) const = default;
};

// Applies one event. Throws Error(kPreconditionFailed) when the event would
// break a session invariant (illegal phase move, pruned threat revived,
// answer to an unpresented query, ...). Phase side effects:
//   answer_recorded{bank: threat, assess: true}  interrogation -> assessment
//   bank_updated{action: refine}                 assessment -> interrogation
void apply_event(SessionState& state, const Event& event);

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

std::int64_t system_clock_ms();

class SessionStore;

// Exclusive writer for one session, backed by an advisory lock file. Events
// are fsync'ed before append() returns.
class SessionWriter {
 public:
  SessionWriter(SessionWriter&& other) noexcept;
  SessionWriter& operator=(SessionWriter&&) = delete;
  ~SessionWriter();

  const SessionState& state() const noexcept { return state_; }
  const std::vector<Event>& events() const noexcept { return events_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  // Throws kTerminalSession, kPreconditionFailed (invalid event) or
  // kStorageFailure. On any throw nothing was written.
  const Event& append(EventKind kind, nlohmann::json payload);

 private:
  friend class SessionStore;
  SessionWriter(const SessionStore& store, std::filesystem::path dir, SessionState state,
                std::vector<Event> events, int lock_fd);

  const SessionStore* store_;
  std::filesystem::path dir_;
  SessionState state_;
  std::vector<Event> events_;
  int lock_fd_ = -1;
};

// Directory of sessions: <root>/<session_id>/{session.json,events.jsonl,lock,artifacts/}.
class SessionStore {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit SessionStore(std::filesystem::path root, Clock clock = system_clock_ms);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path session_dir(const std::string& id) const { return root_ / id; }

  SessionState create(Flow flow);
  bool exists(const std::string& id) const;
  std::vector<std::string> list() const;

  // Replays the persisted log. Throws kUnknownSession, or kCorruptLog with
  // the failing seq in the details.
  SessionState load(const std::string& id) const;
  std::vector<Event> read_log(const std::string& id) const;

  // Throws kSessionBusy when another writer holds the session.
  SessionWriter open_writer(const std::string& id) const;

  // Called after each durable append; tests use it to simulate a crash.
  void set_after_append(std::function<void(const Event&)> hook) { after_append_ = std::move(hook); }

 private:
  friend class SessionWriter;
  SessionState header(const std::string& id) const;

  std::filesystem::path root_;
  Clock clock_;
  std::function<void(const Event&)> after_append_;
};

}  // namespace hwthreat
