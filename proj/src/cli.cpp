#include "hwthreat/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>

#include "hwthreat/engine.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/http_service.hpp"

namespace hwthreat {

using nlohmann::json;

namespace {

// Reads answers from a terminal, one line per query.
class StreamAnswers final : public AnswerSource {
 public:
  StreamAnswers(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  std::optional<std::string> answer(const Query& q) override {
    out_ << "[" << q.query_id << "] " << q.text << (q.mandatory ? "" : " (optional)") << "\n> " << std::flush;
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    return line;
  }

 private:
  std::istream& in_;
  std::ostream& out_;
};

int exit_code_for(const Error& e) {
  switch (error_class(e.code())) {
    case ErrorClass::kClient: return kExitClient;
    case ErrorClass::kNotFound: return kExitNotFound;
    case ErrorClass::kConflict: return kExitConflict;
    case ErrorClass::kUpstream: return kExitUpstream;
    case ErrorClass::kServer: return kExitInternal;
  }
  return kExitInternal;
}

HttpService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hardware security threat modeling and test planning"};
  app.require_subcommand(1);
  std::string workspace = ".";
  std::string log_level = "warn";
  std::optional<std::string> session;
  app.add_option("-w,--workspace", workspace, "Workspace directory")->capture_default_str();
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  auto* init = app.add_subcommand("init", "Create a workspace with a default config.json");

  std::string ingest_file, ingest_kind, ingest_title;
  auto* ingest = app.add_subcommand("ingest", "Add a document to the workspace");
  ingest->add_option("file", ingest_file, "Text file to ingest")->required()->check(CLI::ExistingFile);
  ingest->add_option("--kind", ingest_kind, "design_spec, isa_manual or attack_knowledge")->required();
  ingest->add_option("--title", ingest_title, "Document title (default: file name)");

  auto* index = app.add_subcommand("index", "Manage the retrieval index");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "Chunk and embed every document");

  auto* sess = app.add_subcommand("session", "Manage sessions");
  sess->require_subcommand(1);
  std::string new_flow;
  auto* sess_new = sess->add_subcommand("new", "Start a session and make it current");
  sess_new->add_option("--flow", new_flow, "physical_supply_chain or software_exploitable")->required();
  auto* sess_list = sess->add_subcommand("list", "List sessions");
  auto* sess_show = sess->add_subcommand("show", "Show a session summary");
  auto* sess_ask = sess->add_subcommand("ask", "Present the next interview question");
  std::string answer_text;
  std::optional<std::string> answer_query;
  auto* sess_answer = sess->add_subcommand("answer", "Answer the presented question");
  sess_answer->add_option("text", answer_text, "Answer text")->required();
  sess_answer->add_option("--query-id", answer_query, "Question being answered (default: the presented one)");
  for (auto* sub : {sess_show, sess_ask, sess_answer}) sub->add_option("--session", session, "Session id");

  auto* run = app.add_subcommand("run", "Run a threat-identification flow");
  run->require_subcommand(1);
  std::optional<std::string> run_answers;
  auto* run_flow1 = run->add_subcommand("flow1", "Physical and supply-chain threat interview");
  run_flow1->add_option("--answers", run_answers, "Answers file; questions are asked on stdin otherwise");
  auto* run_flow2 = run->add_subcommand("flow2", "Software-exploitable policy mining");
  for (auto* sub : {run_flow1, run_flow2}) sub->add_option("--session", session, "Session id");

  auto* plan_cmd = app.add_subcommand("plan", "Test plans");
  plan_cmd->require_subcommand(1);
  std::optional<std::string> plan_answers;
  auto* plan_generate = plan_cmd->add_subcommand("generate", "Gather capabilities and generate the test plan");
  plan_generate->add_option("--answers", plan_answers, "Answers file for the capability questions");
  plan_generate->add_option("--session", session, "Session id");

  std::string export_name, export_format = "json";
  std::optional<std::string> export_out;
  auto* exp = app.add_subcommand("export", "Export an artifact");
  exp->add_option("artifact", export_name, "threat_list, policy_list or test_plan")
      ->required()
      ->check(CLI::IsMember({"threat_list", "policy_list", "test_plan"}));
  exp->add_option("--format", export_format, "json or markdown")->check(CLI::IsMember({"json", "markdown"}));
  exp->add_option("--out", export_out, "Output file (default: stdout)");
  exp->add_option("--session", session, "Session id");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (init->parsed()) {
      Workspace ws(workspace);
      if (!std::filesystem::exists(ws.config_path())) {
        write_file_atomic(ws.config_path(), config_to_json(EngineConfig{}).dump(2) + "\n");
      }
      out << json{{"workspace", std::filesystem::absolute(ws.root()).string()}}.dump(2) << "\n";
      return kExitOk;
    }

    Engine engine(workspace);
    auto print = [&](const json& j) { out << j.dump(2) << "\n"; };

    if (ingest->parsed()) {
      auto kind = parse_doc_kind(ingest_kind);
      if (!kind) throw Error(ErrorCode::kInvalidArgument, "--kind must be design_spec, isa_manual or attack_knowledge");
      std::string title = ingest_title.empty() ? std::filesystem::path(ingest_file).filename().string() : ingest_title;
      SourceDocument d = engine.ingest(read_file(ingest_file), *kind, title);
      print({{"doc_id", d.doc_id}, {"kind", to_string(d.kind)}, {"title", d.title},
             {"byte_length", d.byte_length}, {"char_length", d.char_length}});
    } else if (index_build->parsed()) {
      print(engine.build_index());
    } else if (sess_new->parsed()) {
      auto flow = parse_flow(new_flow);
      if (!flow) throw Error(ErrorCode::kInvalidArgument, "--flow must be physical_supply_chain or software_exploitable");
      SessionState s = engine.create_session(*flow);
      print({{"session_id", s.session_id}, {"flow", to_string(s.flow)}, {"phase", to_string(s.phase)}});
    } else if (sess_list->parsed()) {
      print({{"sessions", engine.list_sessions()}});
    } else if (sess_show->parsed()) {
      print(engine.summary(engine.resolve_session(session)));
    } else if (sess_ask->parsed()) {
      auto q = engine.next_query(engine.resolve_session(session));
      print(q ? json{{"done", false}, {"query", to_json(*q)}} : json{{"done", true}, {"query", nullptr}});
    } else if (sess_answer->parsed()) {
      std::string id = engine.resolve_session(session);
      std::string qid;
      if (answer_query) {
        qid = *answer_query;
      } else {
        auto pending = engine.pending_query(id);
        if (!pending) throw Error(ErrorCode::kNotPresented, "no question is awaiting an answer; run session ask");
        qid = pending->query.query_id;
      }
      engine.answer(id, qid, answer_text);
      print(engine.summary(id));
    } else if (run_flow1->parsed()) {
      std::string id = engine.resolve_session(session);
      StreamAnswers interactive(in, err);
      std::optional<ScriptedAnswers> scripted;
      if (run_answers) scripted.emplace(ScriptedAnswers::from_file(*run_answers));
      print(engine.run_flow1(id, scripted ? static_cast<AnswerSource&>(*scripted) : interactive));
    } else if (run_flow2->parsed()) {
      print(engine.run_flow2(engine.resolve_session(session)));
    } else if (plan_generate->parsed()) {
      std::string id = engine.resolve_session(session);
      StreamAnswers interactive(in, err);
      std::optional<ScriptedAnswers> scripted;
      if (plan_answers) scripted.emplace(ScriptedAnswers::from_file(*plan_answers));
      TestPlan p = engine.generate_plan(id, scripted ? static_cast<AnswerSource*>(&*scripted) : &interactive);
      print({{"plan_id", p.plan_id}, {"cases", p.cases.size()}, {"skipped", p.skipped.size()}});
    } else if (exp->parsed()) {
      std::string body = engine.export_artifact(engine.resolve_session(session), export_name, export_format);
      if (export_out) {
        write_file_atomic(*export_out, body);
      } else {
        out << body;
      }
    } else if (serve->parsed()) {
      HttpService service(engine);
      int bound = service.bind(host, port);
      if (bound < 0) throw Error(ErrorCode::kInvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
      err << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.serve();
      g_service = nullptr;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    if (!e.details().is_null()) err << e.details().dump() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error [internal]: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace hwthreat
