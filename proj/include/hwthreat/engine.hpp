#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "hwthreat/config.hpp"
#include "hwthreat/interview.hpp"
#include "hwthreat/policy_agent.hpp"
#include "hwthreat/testplan_agent.hpp"
#include "hwthreat/threat_agent.hpp"
#include "hwthreat/workspace.hpp"

namespace hwthreat {

struct PresentedQuery {
  BankId bank = BankId::kThreat;
  Query query;
};

nlohmann::json to_json(const PresentedQuery& q);

// Operations shared by the command line and the HTTP service. Each mutating
// call takes the session's writer lock for its duration, logs every model
// exchange to the session, and refreshes the session's artifact files.
class Engine {
 public:
  // Providers are built from the workspace configuration.
  explicit Engine(std::filesystem::path workspace);
  Engine(std::filesystem::path workspace, EngineConfig config, std::shared_ptr<ChatProvider> chat,
         std::shared_ptr<EmbeddingProvider> embedder);

  Workspace& workspace() noexcept { return ws_; }
  SessionStore& store() noexcept { return store_; }
  const EngineConfig& config() const noexcept { return cfg_; }
  // Test hook: order in which threat categories are assessed.
  void set_issue_order(std::vector<std::string> order) { issue_order_ = std::move(order); }

  SourceDocument ingest(std::string_view bytes, DocKind kind, std::string title);
  nlohmann::json build_index();

  SessionState create_session(Flow flow);
  SessionState load(const std::string& id) const;
  nlohmann::json summary(const std::string& id) const;
  nlohmann::json list_sessions() const;
  // The explicit id, else the workspace's current session.
  std::string resolve_session(const std::optional<std::string>& id) const;

  // Presents the next query of whichever interview the session is in,
  // starting the threat interview or finishing an assessment round first
  // when needed. nullopt when no interview query is left.
  std::optional<PresentedQuery> next_query(const std::string& id);
  std::optional<PresentedQuery> pending_query(const std::string& id) const;
  // Records the answer. With run_assessment, a due assessment round runs
  // before returning; otherwise it waits for advance().
  void answer(const std::string& id, const std::string& query_id, const std::string& text,
              bool run_assessment = true);
  void advance(const std::string& id);

  nlohmann::json run_flow1(const std::string& id, AnswerSource& answers);
  nlohmann::json run_flow2(const std::string& id);
  VerificationCapabilities gather_capabilities(const std::string& id, AnswerSource& answers);
  // Gathers capabilities from `answers` first if the interview is open.
  TestPlan generate_plan(const std::string& id, AnswerSource* answers = nullptr);

  // threat_list | policy_list | test_plan, as json or markdown. Throws
  // kNotFound when the session has not produced it.
  std::string export_artifact(const std::string& id, const std::string& name, const std::string& format) const;
  nlohmann::json threats(const std::string& id) const;
  nlohmann::json policies(const std::string& id) const;

 private:
  template <typename F>
  auto with_session(const std::string& id, F&& f);
  const KnowledgeBase& knowledge();
  threat::Flow1Options flow1_options() const;
  plan::PlanOptions plan_options() const;
  void write_artifacts(const SessionState& state) const;

  Workspace ws_;
  EngineConfig cfg_;
  SessionStore store_;
  std::shared_ptr<ChatProvider> chat_;
  std::shared_ptr<EmbeddingProvider> embedder_;
  std::vector<std::string> issue_order_;
  std::mutex kb_mu_;
  std::unique_ptr<KnowledgeBase> kb_;
};

std::string threat_list_markdown(const nlohmann::json& doc);
std::string policy_list_markdown(const nlohmann::json& doc);

}  // namespace hwthreat
