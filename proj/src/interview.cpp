#include "hwthreat/interview.hpp"

#include <fstream>

#include "hwthreat/error.hpp"
#include "hwthreat/text_util.hpp"

namespace hwthreat {

using nlohmann::json;

ScriptedAnswers::ScriptedAnswers(std::vector<Record> records)
    : records_(std::move(records)), used_(records_.size(), false) {}

ScriptedAnswers ScriptedAnswers::from_json(const json& j) {
  const json& list = j.is_object() ? j.at("answers") : j;
  if (!list.is_array()) throw Error(ErrorCode::kInvalidArgument, "answers file needs an array of records");
  std::vector<Record> records;
  for (const json& r : list) {
    records.push_back({r.at("query").get<std::string>(), r.at("answer").get<std::string>()});
  }
  return ScriptedAnswers(std::move(records));
}

ScriptedAnswers ScriptedAnswers::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "answers file not found: " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "answers file is not valid JSON");
  return from_json(j);
}

std::optional<std::size_t> ScriptedAnswers::select(const std::string& query_id) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!used_[i] && records_[i].query == query_id) return i;
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!used_[i] && records_[i].query == "*next") return i;
  }
  return std::nullopt;
}

std::optional<std::string> ScriptedAnswers::answer(const Query& query) {
  auto i = select(query.query_id);
  if (!i) return std::nullopt;
  used_[*i] = true;
  return records_[*i].answer;
}

void ScriptedAnswers::prime(const SessionState& state) {
  for (const auto* transcript : {&state.transcript, &state.capability_transcript}) {
    for (const auto& entry : *transcript) {
      if (auto i = select(entry.query_id)) used_[*i] = true;
    }
  }
}

std::optional<Query> pending_query(const SessionState& state, BankId bank) {
  const QueryBank& b = state.bank(bank);
  if (!b.presented) return std::nullopt;
  return *b.find(*b.presented);
}

std::optional<Query> present_next(SessionWriter& writer, BankId bank) {
  const QueryBank& b = writer.state().bank(bank);
  if (b.presented) {
    throw Error(ErrorCode::kPendingAnswer, "query " + *b.presented + " is still awaiting its answer",
                {{"query_id", *b.presented}});
  }
  std::size_t pos = b.cursor();
  if (pos == b.queries.size()) return std::nullopt;
  Query q = b.queries[pos];
  writer.append(EventKind::kQueryPresented, {{"bank", to_string(bank)}, {"query_id", q.query_id}});
  return q;
}

void record_answer(SessionWriter& writer, BankId bank, const std::string& query_id, const std::string& answer,
                   bool allow_blank_optional, bool assess) {
  const QueryBank& b = writer.state().bank(bank);
  if (!b.presented || *b.presented != query_id) {
    throw Error(ErrorCode::kNotPresented, "query " + query_id + " is not the presented query",
                {{"query_id", query_id}, {"presented", b.presented ? json(*b.presented) : json(nullptr)}});
  }
  const Query* q = b.find(query_id);
  if (text::is_blank(answer) && !(allow_blank_optional && !q->mandatory)) {
    throw Error(ErrorCode::kEmptyAnswer,
                "a blank answer cannot be recorded; describe the situation or say that it does not apply",
                {{"query_id", query_id}});
  }
  writer.append(EventKind::kAnswerRecorded, {{"bank", to_string(bank)},
                                             {"query_id", query_id},
                                             {"answer", text::trim(answer)},
                                             {"assess", assess}});
}

}  // namespace hwthreat
