#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwthreat/session.hpp"

namespace hwthreat {

// Where engineer answers come from during a flow run.
class AnswerSource {
 public:
  virtual ~AnswerSource() = default;
  // nullopt when the source has nothing for this query.
  virtual std::optional<std::string> answer(const Query& query) = 0;
};

// Answers file (docs/answers_format.md): ordered records of
// {"query": "<query_id>" | "*next", "answer": "<text>"}. A query takes the
// first unused record naming it, otherwise the first unused "*next" record.
class ScriptedAnswers final : public AnswerSource {
 public:
  struct Record {
    std::string query;
    std::string answer;
  };

  explicit ScriptedAnswers(std::vector<Record> records);
  static ScriptedAnswers from_json(const nlohmann::json& j);
  static ScriptedAnswers from_file(const std::filesystem::path& path);

  std::optional<std::string> answer(const Query& query) override;

  // Marks the records a resumed session already consumed, replaying the
  // selection rule over the recorded answers in order.
  void prime(const SessionState& state);

 private:
  std::optional<std::size_t> select(const std::string& query_id) const;

  std::vector<Record> records_;
  std::vector<bool> used_;
};

// The query currently awaiting an answer, if any.
std::optional<Query> pending_query(const SessionState& state, BankId bank);

// Presents the first active query of `bank`. Returns nullopt when none is
// left. Throws kPendingAnswer if a presented query is still unanswered.
std::optional<Query> present_next(SessionWriter& writer, BankId bank);

// Records the answer to the presented query. Throws kNotPresented or
// kEmptyAnswer (blank answers are accepted only for non-mandatory queries
// when allow_blank_optional is set). `assess` is carried in the event and
// moves a threat interview into its assessment phase.
void record_answer(SessionWriter& writer, BankId bank, const std::string& query_id, const std::string& answer,
                   bool allow_blank_optional, bool assess);

}  // namespace hwthreat
