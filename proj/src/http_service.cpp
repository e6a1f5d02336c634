#include "hwthreat/http_service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hwthreat/error.hpp"

namespace hwthreat {

using nlohmann::json;

int http_status_for(const Error& e) {
  if (e.code() == ErrorCode::kTimeout) return 504;
  switch (error_class(e.code())) {
    case ErrorClass::kClient: return 400;
    case ErrorClass::kNotFound: return 404;
    case ErrorClass::kConflict: return 409;
    case ErrorClass::kUpstream: return 502;
    case ErrorClass::kServer: return 500;
  }
  return 500;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

json body_of(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  }
  return j;
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("field '") + key + "' is required", {{"field", key}});
  }
  return body[key].get<std::string>();
}

json query_json(const std::optional<PresentedQuery>& q) {
  if (!q) return {{"done", true}, {"query", nullptr}};
  return {{"done", false}, {"query", to_json(*q)}};
}

std::unique_ptr<ScriptedAnswers> answers_from(const json& body) {
  if (!body.contains("answers")) return nullptr;
  return std::make_unique<ScriptedAnswers>(ScriptedAnswers::from_json(body["answers"]));
}

}  // namespace

HttpService::HttpService(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpService::~HttpService() {
  stop();
  wait_idle();
  for (auto& [id, t] : threads_) {
    if (t.joinable()) t.join();
  }
}

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

void HttpService::serve() { server_->listen_after_bind(); }

void HttpService::stop() {
  if (server_->is_running()) server_->stop();
}

void HttpService::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return running_ == 0; });
}

void HttpService::start_job(const std::string& id, const std::string& step, std::function<json()> work) {
  {
    std::lock_guard lock(mu_);
    Job& job = jobs_[id];
    if (job.state == "running") {
      throw Error(ErrorCode::kSessionBusy, "session " + id + " is running " + job.step,
                  {{"session_id", id}, {"step", job.step}});
    }
    job = Job{"running", step, nullptr, nullptr};
    ++running_;
    // The previous job of this session has finished; reap its thread.
    if (auto it = threads_.find(id); it != threads_.end() && it->second.joinable()) it->second.join();
  }
  std::lock_guard lock(mu_);
  threads_[id] = std::thread([this, id, work = std::move(work)] {
    Job done;
    try {
      done.result = work();
      done.state = "succeeded";
    } catch (const Error& e) {
      done.state = "failed";
      done.error = e.to_json();
      done.error["status"] = http_status_for(e);
    } catch (const std::exception& e) {
      done.state = "failed";
      done.error = {{"code", "internal"}, {"message", e.what()}, {"status", 500}};
    }
    std::lock_guard lock(mu_);
    Job& job = jobs_[id];
    job.state = done.state;
    job.result = std::move(done.result);
    job.error = std::move(done.error);
    if (--running_ == 0) idle_cv_.notify_all();
  });
}

json HttpService::job_status(const std::string& id) {
  Job job;
  {
    std::lock_guard lock(mu_);
    if (auto it = jobs_.find(id); it != jobs_.end()) job = it->second;
  }
  SessionState s = engine_.load(id);
  json pending = nullptr;
  for (BankId b : {BankId::kThreat, BankId::kCapability}) {
    if (auto q = pending_query(s, b)) pending = to_json(PresentedQuery{b, *q});
  }
  return {{"session_id", id},
          {"state", job.state},
          {"step", job.step},
          {"progress",
           {{"phase", to_string(s.phase)},
            {"last_seq", s.last_seq},
            {"iteration", s.iteration()},
            {"policy_batches", s.policy_batches.size()},
            {"pending_query", pending}}},
          {"result", job.result},
          {"error", job.error}};
}

void HttpService::routes() {
  auto& srv = *server_;
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guarded = [](Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_json(res, http_status_for(e), {{"error", e.to_json()}});
      } catch (const json::exception& e) {
        send_json(res, 400, {{"error", {{"code", "invalid_argument"}, {"message", e.what()}}}});
      } catch (const std::exception& e) {
        spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
        send_json(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
      }
    };
  };
  auto session_id = [this](const httplib::Request& req) {
    std::string id = req.matches[1];
    if (!engine_.store().exists(id)) {
      throw Error(ErrorCode::kUnknownSession, "unknown session: " + id, {{"session_id", id}});
    }
    return id;
  };

  srv.Get("/v1/health", guarded([](const auto&, auto& res) { send_json(res, 200, {{"status", "ok"}}); }));

  srv.Post("/v1/documents", guarded([this](const auto& req, auto& res) {
             json body = body_of(req);
             auto kind = parse_doc_kind(required_string(body, "kind"));
             if (!kind) throw Error(ErrorCode::kInvalidArgument, "kind must be design_spec, isa_manual or attack_knowledge");
             std::string title = body.value("title", std::string("untitled"));
             SourceDocument d = engine_.ingest(required_string(body, "body"), *kind, title);
             send_json(res, 201, {{"doc_id", d.doc_id}, {"kind", to_string(d.kind)}, {"title", d.title},
                                  {"byte_length", d.byte_length}, {"char_length", d.char_length}});
           }));
  srv.Get("/v1/documents", guarded([this](const auto&, auto& res) {
            json out = json::array();
            for (const auto& d : engine_.workspace().documents()) {
              out.push_back({{"doc_id", d.doc_id}, {"kind", to_string(d.kind)}, {"title", d.title},
                             {"byte_length", d.byte_length}});
            }
            send_json(res, 200, {{"documents", out}});
          }));
  srv.Post("/v1/index/build",
           guarded([this](const auto&, auto& res) { send_json(res, 200, engine_.build_index()); }));

  srv.Post("/v1/sessions", guarded([this](const auto& req, auto& res) {
             json body = body_of(req);
             auto flow = parse_flow(required_string(body, "flow"));
             if (!flow) throw Error(ErrorCode::kInvalidArgument, "flow must be physical_supply_chain or software_exploitable");
             SessionState s = engine_.create_session(*flow);
             send_json(res, 201, {{"session_id", s.session_id}, {"flow", to_string(s.flow)}, {"phase", to_string(s.phase)}});
           }));
  srv.Get("/v1/sessions", guarded([this](const auto&, auto& res) {
            send_json(res, 200, {{"sessions", engine_.list_sessions()}});
          }));
  srv.Get(R"(/v1/sessions/([^/]+))", guarded([this, session_id](const auto& req, auto& res) {
            send_json(res, 200, engine_.summary(session_id(req)));
          }));
  srv.Get(R"(/v1/sessions/([^/]+)/status)", guarded([this, session_id](const auto& req, auto& res) {
            send_json(res, 200, job_status(session_id(req)));
          }));

  srv.Post(R"(/v1/sessions/([^/]+)/queries/next)", guarded([this, session_id](const auto& req, auto& res) {
             send_json(res, 200, query_json(engine_.next_query(session_id(req))));
           }));
  srv.Get(R"(/v1/sessions/([^/]+)/queries/pending)", guarded([this, session_id](const auto& req, auto& res) {
            auto q = engine_.pending_query(session_id(req));
            send_json(res, 200, {{"query", q ? to_json(*q) : json(nullptr)}});
          }));
  srv.Post(R"(/v1/sessions/([^/]+)/answers)", guarded([this, session_id](const auto& req, auto& res) {
             std::string id = session_id(req);
             json body = body_of(req);
             if (!body.contains("answer") || !body["answer"].is_string()) {
               throw Error(ErrorCode::kInvalidArgument, "field 'answer' is required", {{"field", "answer"}});
             }
             engine_.answer(id, required_string(body, "query_id"), body["answer"].get<std::string>(), false);
             if (engine_.load(id).phase == Phase::kAssessment) {
               start_job(id, "assessment", [this, id] {
                 engine_.advance(id);
                 return json{{"phase", to_string(engine_.load(id).phase)}};
               });
               send_json(res, 202, {{"recorded", true}, {"job", "assessment"}});
             } else {
               send_json(res, 200, {{"recorded", true}, {"job", nullptr}});
             }
           }));

  srv.Post(R"(/v1/sessions/([^/]+)/runs/flow1)", guarded([this, session_id](const auto& req, auto& res) {
             std::string id = session_id(req);
             std::shared_ptr<ScriptedAnswers> answers = answers_from(body_of(req));
             if (!answers) answers = std::make_shared<ScriptedAnswers>(std::vector<ScriptedAnswers::Record>{});
             start_job(id, "flow1", [this, id, answers] { return engine_.run_flow1(id, *answers); });
             send_json(res, 202, {{"job", "flow1"}});
           }));
  srv.Post(R"(/v1/sessions/([^/]+)/runs/flow2)", guarded([this, session_id](const auto& req, auto& res) {
             std::string id = session_id(req);
             start_job(id, "flow2", [this, id] { return engine_.run_flow2(id); });
             send_json(res, 202, {{"job", "flow2"}});
           }));
  srv.Post(R"(/v1/sessions/([^/]+)/steps/advance)", guarded([this, session_id](const auto& req, auto& res) {
             std::string id = session_id(req);
             start_job(id, "assessment", [this, id] {
               engine_.advance(id);
               return json{{"phase", to_string(engine_.load(id).phase)}};
             });
             send_json(res, 202, {{"job", "assessment"}});
           }));
  srv.Post(R"(/v1/sessions/([^/]+)/steps/plan)", guarded([this, session_id](const auto& req, auto& res) {
             std::string id = session_id(req);
             std::shared_ptr<ScriptedAnswers> answers = answers_from(body_of(req));
             start_job(id, "plan", [this, id, answers] {
               TestPlan p = engine_.generate_plan(id, answers.get());
               return json{{"plan_id", p.plan_id}, {"cases", p.cases.size()}, {"skipped", p.skipped.size()}};
             });
             send_json(res, 202, {{"job", "plan"}});
           }));

  srv.Get(R"(/v1/sessions/([^/]+)/threats)", guarded([this, session_id](const auto& req, auto& res) {
            send_json(res, 200, engine_.threats(session_id(req)));
          }));
  srv.Get(R"(/v1/sessions/([^/]+)/policies)", guarded([this, session_id](const auto& req, auto& res) {
            send_json(res, 200, engine_.policies(session_id(req)));
          }));
  auto artifact = [this, session_id](const httplib::Request& req, httplib::Response& res, const std::string& name) {
    std::string format = req.has_param("format") ? req.get_param_value("format") : "json";
    std::string body = engine_.export_artifact(session_id(req), name, format);
    res.status = 200;
    res.set_content(body, format == "markdown" ? "text/markdown; charset=utf-8" : "application/json");
  };
  srv.Get(R"(/v1/sessions/([^/]+)/plan)",
          guarded([artifact](const auto& req, auto& res) { artifact(req, res, "test_plan"); }));
  srv.Get(R"(/v1/sessions/([^/]+)/artifacts/([a-z_]+))",
          guarded([artifact](const auto& req, auto& res) { artifact(req, res, req.matches[2]); }));
}

}  // namespace hwthreat
