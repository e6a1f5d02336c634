// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed below.

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "hwthreat/cli.hpp"
#include "hwthreat/error.hpp"
#include "hwthreat/mock_provider.hpp"
#include "hwthreat/text_util.hpp"
#include "test_support.hpp"

namespace hwthreat {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

constexpr double kScoreTolerance = 1e-9;
constexpr double kRetrievalBudgetSeconds = 10.0;
constexpr double kFlow1BudgetSeconds = 5.0;
constexpr double kFlow2BudgetSeconds = 10.0;
constexpr int kRetrievalTrials = 200;
constexpr int kChunkerTrials = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  Outcome outcome(const std::string& summary) const {
    if (failed_ == 0) return {true, summary};
    std::string d = std::to_string(failed_) + " check(s) failed: ";
    for (std::size_t i = 0; i < failures_.size(); ++i) d += (i ? "; " : "") + failures_[i];
    return {false, d};
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f s", s);
  return buf;
}

ScriptedAnswers answers(const std::string& flow) {
  return ScriptedAnswers::from_file(testing::fixture(flow + "/answers.json"));
}

// ---- retrieval ---------------------------------------------------------------

Outcome retrieval_oracle() {
  Checks c;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto t0 = std::chrono::steady_clock::now();
  std::size_t compared = 0;
  for (int trial = 0; trial < kRetrievalTrials; ++trial) {
    std::size_t n = 1 + rng() % 2000;
    std::size_t dim = 1 + rng() % 64;
    std::size_t k = 1 + rng() % 32;
    VectorIndex index(dim);
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(dim);
      // Some rows repeat earlier vectors (exact ties) or are all zero.
      std::uint64_t r = rng() % 20;
      if (r == 0 && !rows.empty()) {
        v = rows[rng() % rows.size()].second;
      } else if (r != 1) {
        for (auto& x : v) x = u(rng);
      }
      char id[32];
      std::snprintf(id, sizeof id, "c%06llu", static_cast<unsigned long long>(rng() % 1000000));
      std::string sid = std::string(id) + "-" + std::to_string(i);
      index.add(sid, EmbeddingVector::make(v), DocKind::kDesignSpec);
      rows.emplace_back(std::move(sid), std::move(v));
    }
    std::vector<double> q(dim);
    for (auto& x : q) x = u(rng);
    auto got = index.search(EmbeddingVector::make(q), k);
    auto want = testing::brute_force_top_k(rows, q, k);
    c.expect(got.size() == want.size(), "trial " + std::to_string(trial) + ": result size");
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
      c.expect(got[i].chunk_id == want[i].id, "trial " + std::to_string(trial) + ": id at rank " + std::to_string(i + 1));
      c.expect(got[i].rank == i + 1, "trial " + std::to_string(trial) + ": rank numbering");
      c.expect(std::abs(got[i].score - want[i].score) <= kScoreTolerance,
               "trial " + std::to_string(trial) + ": score at rank " + std::to_string(i + 1));
      ++compared;
    }
  }
  double elapsed = seconds_since(t0);
  c.expect(elapsed < kRetrievalBudgetSeconds, "runtime " + fmt_seconds(elapsed));
  return c.outcome(std::to_string(kRetrievalTrials) + " trials, " + std::to_string(compared) + " hits compared, " +
                   fmt_seconds(elapsed));
}

// ---- chunker -------------------------------------------------------------------

Outcome chunker_properties() {
  Checks c;
  std::mt19937_64 rng(99);
  // No whitespace, so normalization leaves every code point in place.
  const std::vector<std::string> alphabet = {"a", "b", "z", "0", "\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x94\x92"};
  for (int trial = 0; trial < kChunkerTrials; ++trial) {
    std::size_t length = 1 + rng() % 4000;
    std::size_t size = 1 + rng() % 1000;
    std::size_t overlap = rng() % size;
    std::vector<std::string> cps(length);
    std::string body;
    for (auto& cp : cps) {
      cp = alphabet[rng() % alphabet.size()];
      body += cp;
    }
    std::string tag = "trial " + std::to_string(trial) + " (" + std::to_string(length) + "," + std::to_string(size) +
                      "," + std::to_string(overlap) + ")";
    SourceDocument doc = ingest_document(body, DocKind::kDesignSpec, "prop");
    c.expect(doc.body == body && doc.char_length == length, tag + ": ingest altered the body");
    auto chunks = chunk_document(doc, size, overlap);

    std::size_t stride = size - overlap;
    std::size_t expected_count = length <= size ? 1 : 1 + (length - size + stride - 1) / stride;
    c.expect(chunks.size() == expected_count, tag + ": chunk count");
    if (chunks.empty()) continue;

    // Coverage: starts at 0, ends at the body end, no gaps.
    c.expect(chunks.front().start == 0, tag + ": first start");
    c.expect(chunks.back().end == length, tag + ": last end");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const Chunk& ch = chunks[i];
      c.expect(ch.ordinal == i, tag + ": ordinal");
      c.expect(ch.start == i * stride, tag + ": start offset");
      c.expect(ch.end - ch.start <= size, tag + ": chunk longer than chunk_size");
      if (i + 1 < chunks.size()) {
        c.expect(ch.end - ch.start == size, tag + ": non-final chunk shorter than chunk_size");
        // Overlap: consecutive chunks share exactly `overlap` code points.
        c.expect(ch.end >= chunks[i + 1].start && ch.end - chunks[i + 1].start == overlap, tag + ": overlap");
      }
      // Round trip: the chunk text is exactly its span of the body.
      std::string span;
      for (std::size_t p = ch.start; p < ch.end; ++p) span += cps[p];
      c.expect(ch.text == span, tag + ": chunk text differs from its span");
    }
    // Round trip: dropping each chunk's overlap prefix rebuilds the body.
    std::string rebuilt = chunks[0].text;
    for (std::size_t i = 1; i < chunks.size(); ++i) {
      std::size_t shared = chunks[i - 1].end - chunks[i].start;
      std::size_t byte = 0;
      for (std::size_t p = chunks[i].start; p < chunks[i].start + shared; ++p) byte += cps[p].size();
      rebuilt += chunks[i].text.substr(std::min(byte, chunks[i].text.size()));
    }
    c.expect(rebuilt == body, tag + ": reconstruction");
  }
  return c.outcome(std::to_string(kChunkerTrials) + " triples");
}

// ---- Flow 1 ----------------------------------------------------------------------

struct Flow1Run {
  std::string session_id;
  json threat_doc;
  std::map<std::string, std::string> artifacts;
  std::vector<Event> log;
  double seconds = 0;
};

std::map<std::string, std::string> artifacts_of(Engine& engine, const std::string& id) {
  return testing::snapshot_files(engine.workspace().artifacts_dir(id));
}

Flow1Run run_flow1_golden(const fs::path& ws) {
  testing::prepare_flow1_workspace(ws);
  Engine engine(ws);
  Flow1Run r;
  r.session_id = engine.create_session(Flow::kPhysicalSupplyChain).session_id;
  auto src = answers("flow1");
  auto t0 = std::chrono::steady_clock::now();
  r.threat_doc = engine.run_flow1(r.session_id, src);
  r.seconds = seconds_since(t0);
  r.artifacts = artifacts_of(engine, r.session_id);
  r.log = engine.store().read_log(r.session_id);
  return r;
}

Outcome flow1_golden() {
  Checks c;
  TempDir a, b;
  Flow1Run first = run_flow1_golden(a.path());
  const json& doc = first.threat_doc;

  c.expect(doc["summary"]["iterations"] == 4, "iterations = " + doc["summary"]["iterations"].dump());
  c.expect(doc["summary"]["retained"] == 4, "retained = " + doc["summary"]["retained"].dump());
  c.expect(doc["summary"]["pruned"] == 1, "pruned = " + doc["summary"]["pruned"].dump());
  c.expect(doc["summary"]["candidate"] == 0, "undecided threats remain");
  c.expect(doc["threats"].size() == 5, "threat count");
  for (const auto& t : doc["threats"]) {
    bool invasive = text::to_lower(t["label"].get<std::string>()) == "invasive hardware attacks";
    c.expect(t["status"] == (invasive ? "pruned" : "retained"), "status of " + t["label"].get<std::string>());
  }

  // The scripted mock removes exactly two queries.
  std::size_t removed = 0, answered = 0;
  for (const auto& q : doc["query_bank"]) {
    if (q["status"] == "removed") ++removed;
    if (q["status"] == "asked") ++answered;
  }
  c.expect(removed == 2, "removed queries = " + std::to_string(removed));
  c.expect(answered == 4, "answered queries = " + std::to_string(answered));

  // Pruned never regresses across the log.
  std::set<std::string> pruned;
  std::size_t threat_events = 0;
  for (const Event& e : first.log) {
    if (e.kind != EventKind::kThreatUpdated) continue;
    ++threat_events;
    std::string id = e.payload["threat"]["category_id"];
    std::string status = e.payload["threat"]["status"];
    c.expect(!(pruned.count(id) && status != "pruned"), "pruned threat " + id + " changed at seq " + std::to_string(e.seq));
    if (status == "pruned") pruned.insert(id);
  }
  c.expect(pruned == std::set<std::string>{"invasive_hardware_attacks"}, "pruned set");

  Flow1Run second = run_flow1_golden(b.path());
  c.expect(!first.artifacts.empty() && first.artifacts == second.artifacts, "repeat run artifacts differ");
  c.expect(first.threat_doc.dump() == second.threat_doc.dump(), "repeat run threat list differs");
  c.expect(first.seconds < kFlow1BudgetSeconds, "runtime " + fmt_seconds(first.seconds));
  c.expect(second.seconds < kFlow1BudgetSeconds, "repeat runtime " + fmt_seconds(second.seconds));
  return c.outcome("4 iterations, 4 retained / 1 pruned, " + std::to_string(threat_events) +
                   " threat events checked, repeat identical, " + fmt_seconds(first.seconds));
}

// ---- Flow 2 ----------------------------------------------------------------------

std::string element_key(const std::string& kind, const std::string& name) { return kind + " " + name; }

Outcome flow2_golden() {
  Checks c;
  TempDir ws;
  testing::prepare_flow2_workspace(ws.path());
  Engine engine(ws.path());
  std::string id = engine.create_session(Flow::kSoftwareExploitable).session_id;
  auto t0 = std::chrono::steady_clock::now();
  json doc = engine.run_flow2(id);
  double elapsed = seconds_since(t0);

  json expected = json::parse(testing::read_text(testing::fixture("flow2/expected_policies.json")));
  std::set<std::string> want_elements, got_elements;
  for (const auto& e : expected["elements"]) want_elements.insert(element_key(e[0], e[1]));
  for (const auto& e : doc["elements"]) got_elements.insert(element_key(e["kind"], e["norm_key"]));
  c.expect(doc["elements"].size() == 5, "element count " + std::to_string(doc["elements"].size()));
  c.expect(got_elements == want_elements, "element set");
  c.expect(doc["degraded"] == false, "run degraded");

  struct Expect {
    std::set<std::string> elements, tags;
  };
  std::map<std::string, Expect> want;
  for (const auto& p : expected["policies"]) {
    Expect x;
    for (const auto& e : p["elements"]) x.elements.insert(element_key(e[0], e[1]));
    for (const auto& t : p["risk_tags"]) x.tags.insert(t.get<std::string>());
    want[normalize_statement(p["statement"].get<std::string>())] = x;
  }
  KnowledgeBase kb = engine.workspace().load_knowledge();
  std::map<std::string, Expect> got;
  for (const auto& p : doc["policies"]) {
    std::string statement = p["statement"];
    Expect x;
    for (const auto& e : p["related_elements"]) x.elements.insert(element_key(e["kind"], e["norm_key"]));
    for (const auto& t : p["risk_tags"]) x.tags.insert(t.get<std::string>());
    got[statement] = x;
    c.expect(!p["risk_tags"].empty(), "empty risk_tags: " + statement);
    c.expect(!p["source_refs"].empty(), "empty source_refs: " + statement);
    for (const auto& ref : p["source_refs"]) {
      auto kind = kb.chunk_kind(ref.get<std::string>());
      c.expect(kind == DocKind::kIsaManual, "source " + ref.get<std::string>() + " does not resolve to an ISA chunk");
    }
  }
  c.expect(got.size() == want.size(), "policy count " + std::to_string(got.size()));
  for (const auto& [statement, x] : want) {
    auto it = got.find(statement);
    c.expect(it != got.end(), "missing policy: " + statement);
    if (it == got.end()) continue;
    c.expect(it->second.elements == x.elements, "elements of: " + statement);
    c.expect(it->second.tags == x.tags, "risk tags of: " + statement);
  }
  for (const auto& quote : expected["required_quotes"]) {
    bool found = false;
    for (const auto& [statement, x] : got) found = found || statement.find(quote.get<std::string>()) != std::string::npos;
    c.expect(found, "statement not found verbatim: " + quote.get<std::string>());
  }
  c.expect(elapsed < kFlow2BudgetSeconds, "runtime " + fmt_seconds(elapsed));
  return c.outcome("5 elements, " + std::to_string(got.size()) + " policies match the fixture, " + fmt_seconds(elapsed));
}

// ---- Test plans --------------------------------------------------------------------

Outcome plan_schema_totality() {
  Checks c;
  std::size_t validated = 0;
  for (const std::string flow : {"flow1", "flow2"}) {
    TempDir ws;
    if (flow == "flow1") testing::prepare_flow1_workspace(ws.path());
    else testing::prepare_flow2_workspace(ws.path());
    Engine engine(ws.path());
    std::string id;
    if (flow == "flow1") {
      id = engine.create_session(Flow::kPhysicalSupplyChain).session_id;
      auto src = answers("flow1");
      engine.run_flow1(id, src);
    } else {
      id = engine.create_session(Flow::kSoftwareExploitable).session_id;
      engine.run_flow2(id);
    }
    auto src = answers(flow);
    TestPlan plan = engine.generate_plan(id, &src);
    c.expect(!plan.cases.empty(), flow + ": golden plan has no cases");
    c.expect(plan.skipped.empty(), flow + ": golden plan skipped items");
    std::set<std::string> items(plan.metadata.item_ids.begin(), plan.metadata.item_ids.end());
    for (const auto& tc : plan.cases) {
      auto v = plan::validate_test_case(tc, plan.capability_snapshot, &items);
      c.expect(v.empty(), flow + ": " + (v.empty() ? "" : v.front()));
      ++validated;
    }
    std::string exported = engine.export_artifact(id, "test_plan", "json");
    c.expect(plan::parse_plan(exported) == plan, flow + ": exported plan does not parse back");
  }

  // Reference case through structured export and back.
  TestPlan p;
  p.plan_id = "plan-reference00";
  p.flow = Flow::kSoftwareExploitable;
  p.cases = {testing::reference_case()};
  p.capability_snapshot = testing::reference_capabilities();
  p.metadata.source_artifact = "policy_list";
  p.metadata.item_ids = {p.cases[0].provenance};
  c.expect(plan::validate_test_case(p.cases[0], p.capability_snapshot).empty(), "reference case is not valid");
  std::string text = plan::export_plan(p, plan::ExportFormat::kStructuredJson);
  TestPlan back = plan::parse_plan(text);
  c.expect(back.cases.size() == 1 && back.cases[0] == p.cases[0], "reference case changed in the round trip");
  c.expect(plan::export_plan(back, plan::ExportFormat::kStructuredJson) == text, "re-export differs");

  std::string md = plan::export_plan(p, plan::ExportFormat::kMarkdown);
  std::size_t headings = 0;
  for (const char* h : {"Threat Category", "Test Objective", "Test Methodology", "Expected Result",
                        "Evaluation Criteria", "Testing Tool"}) {
    bool found = md.find(std::string("### ") + h + "\n") != std::string::npos;
    c.expect(found, std::string("markdown heading missing: ") + h);
    headings += found;
  }
  return c.outcome(std::to_string(validated) + " golden cases valid, reference case round-trips, " +
                   std::to_string(headings) + "/6 headings");
}

// ---- Crash and resume -----------------------------------------------------------------

struct Crash {};

// Headless Flow 1: the threat interview followed by the test plan.
void headless_flow1(Engine& engine, const std::string& id) {
  auto threat_answers = answers("flow1");
  engine.run_flow1(id, threat_answers);
  auto capability_answers = answers("flow1");
  engine.generate_plan(id, &capability_answers);
}

Outcome crash_resume() {
  Checks c;
  TempDir ref_ws;
  testing::prepare_flow1_workspace(ref_ws.path());
  std::string ref_id;
  std::map<std::string, std::string> golden;
  std::size_t total = 0;
  {
    Engine engine(ref_ws.path());
    ref_id = engine.create_session(Flow::kPhysicalSupplyChain).session_id;
    headless_flow1(engine, ref_id);
    golden = artifacts_of(engine, ref_id);
    total = engine.store().read_log(ref_id).size();
  }
  std::set<std::string> names;
  for (const auto& [name, body] : golden) names.insert(name);
  c.expect(names == std::set<std::string>{"test_plan.json", "test_plan.md", "threat_list.json"},
           "golden run artifacts: " + std::to_string(golden.size()));
  c.expect(total > 0, "golden log is empty");

  std::size_t crashed = 0;
  for (std::size_t n = 1; n <= total; ++n) {
    TempDir ws;
    testing::prepare_flow1_workspace(ws.path());
    std::string id;
    bool hit = false;
    {
      Engine engine(ws.path());
      id = engine.create_session(Flow::kPhysicalSupplyChain).session_id;
      engine.store().set_after_append([n](const Event& e) {
        if (e.seq == n) throw Crash{};
      });
      try {
        headless_flow1(engine, id);
      } catch (const Crash&) {
        hit = true;
      }
    }
    c.expect(hit, "no crash after event " + std::to_string(n));
    crashed += hit;
    Engine resumed(ws.path());
    try {
      headless_flow1(resumed, id);
    } catch (const std::exception& e) {
      c.expect(false, "resume after event " + std::to_string(n) + " threw: " + e.what());
      continue;
    }
    c.expect(artifacts_of(resumed, id) == golden, "artifacts differ after a crash at event " + std::to_string(n));
    c.expect(resumed.store().read_log(id).size() == total,
             "log length differs after a crash at event " + std::to_string(n));
  }
  return c.outcome(std::to_string(crashed) + "/" + std::to_string(total) +
                   " crash points resumed to identical artifacts");
}

// ---- Secret hygiene ------------------------------------------------------------------

// OpenAI-compatible endpoint answering from the golden mock script. Fails
// the first request with a 500 so the retry path runs too.
class FakeChatServer {
 public:
  FakeChatServer(const std::string& expected_key, const fs::path& script)
      : key_(expected_key), mock_(MockProvider::from_file(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      if (req.get_header_value("Authorization") != "Bearer " + key_) {
        ++unauthorized_;
        res.status = 401;
        res.set_content(R"({"error":{"message":"bad key"}})", "application/json");
        return;
      }
      ++authorized_;
      if (authorized_ == 1) {
        res.status = 500;
        res.set_content(R"({"error":{"message":"transient"}})", "application/json");
        return;
      }
      json body = json::parse(req.body);
      std::string prompt = body["messages"][0]["content"];
      std::string content;
      try {
        content = mock_.complete(prompt);
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
        return;
      }
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeChatServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }
  std::size_t authorized() {
    std::lock_guard lock(mu_);
    return authorized_;
  }
  std::size_t unauthorized() {
    std::lock_guard lock(mu_);
    return unauthorized_;
  }

 private:
  std::string key_;
  MockProvider mock_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::mutex mu_;
  std::size_t authorized_ = 0, unauthorized_ = 0;
};

int cli(const fs::path& ws, std::vector<std::string> args, std::string& out, std::string& err,
        const std::string& log_level = "error") {
  args.insert(args.begin(), {"-w", ws.string(), "--log-level", log_level});
  std::istringstream in;
  std::ostringstream o, e;
  int code = run_cli(args, in, o, e);
  out += o.str();
  err += e.str();
  return code;
}

Outcome secret_hygiene() {
  Checks c;
  const std::string env_name = "HWTHREAT_ACCEPTANCE_API_KEY";
  std::random_device rd;
  const std::string sentinel = "sk-sentinel-" + text::sha256_hex(std::to_string(rd()) + "hygiene").substr(0, 24);
  ::setenv(env_name.c_str(), sentinel.c_str(), 1);

  TempDir ws, logs;
  FakeChatServer fake(sentinel, testing::fixture("flow1/mock.json"));
  fs::copy_file(testing::fixture("flow1/bank.json"), ws / "bank.json");
  json config = {{"provider",
                  {{"kind", "openai"},
                   {"endpoint", "http://127.0.0.1:" + std::to_string(fake.port()) + "/v1"},
                   {"model", "acceptance-model"},
                   {"api_key_ref", env_name},
                   {"timeout_ms", 10000},
                   {"max_retries", 2}}},
                 {"flow1", {{"query_bank_file", "bank.json"}}}};
  write_file_atomic(ws / "config.json", config.dump(2) + "\n");

  auto previous = spdlog::default_logger();
  auto file_logger = spdlog::basic_logger_mt("acceptance-hygiene", (logs / "engine.log").string());
  spdlog::set_default_logger(file_logger);

  std::string out, err;
  int rc = 0;
  for (const auto& [path, kind] : testing::flow1_documents()) {
    rc |= cli(ws.path(), {"ingest", path.string(), "--kind", std::string(to_string(kind))}, out, err, "trace");
  }
  rc |= cli(ws.path(), {"index", "build"}, out, err, "trace");
  rc |= cli(ws.path(), {"session", "new", "--flow", "physical_supply_chain"}, out, err, "trace");
  std::string answers_file = testing::fixture("flow1/answers.json").string();
  rc |= cli(ws.path(), {"run", "flow1", "--answers", answers_file}, out, err, "trace");
  rc |= cli(ws.path(), {"plan", "generate", "--answers", answers_file}, out, err, "trace");
  for (const char* name : {"threat_list", "test_plan"}) {
    for (const char* format : {"json", "markdown"}) rc |= cli(ws.path(), {"export", name, "--format", format}, out, err, "trace");
  }
  rc |= cli(ws.path(), {"session", "show"}, out, err, "trace");

  // HTTP surface of the same workspace.
  {
    testing::ServiceHarness h(ws.path());
    std::string id = h.engine().resolve_session(std::nullopt);
    for (const std::string path : std::vector<std::string>{"/v1/sessions", "/v1/sessions/" + id, "/v1/sessions/" + id + "/status",
                                   "/v1/sessions/" + id + "/threats", "/v1/sessions/" + id + "/plan"}) {
      auto r = h.client().Get(path);
      c.expect(r && r->status == 200, "GET " + path);
      if (r) out += r->body;
    }
  }

  spdlog::default_logger()->flush();
  spdlog::set_default_logger(previous);
  spdlog::drop("acceptance-hygiene");
  ::unsetenv(env_name.c_str());

  c.expect(rc == 0, "a CLI step failed: " + err.substr(0, 300));
  c.expect(fake.authorized() > 1, "the provider was never called with the key");
  c.expect(fake.unauthorized() == 0, "requests without the key reached the provider");

  std::size_t scanned = 0;
  for (const auto& root : {ws.path(), logs.path()}) {
    for (const auto& [name, content] : testing::snapshot_files(root)) {
      ++scanned;
      c.expect(content.find(sentinel) == std::string::npos, "sentinel found in " + name);
    }
  }
  c.expect(testing::snapshot_files(logs.path()).size() == 1 &&
               !testing::read_text(logs / "engine.log").empty(),
           "engine log was not written");
  c.expect(out.find(sentinel) == std::string::npos, "sentinel found in command or HTTP output");
  c.expect(err.find(sentinel) == std::string::npos, "sentinel found in diagnostics");
  return c.outcome(std::to_string(scanned) + " files, CLI and HTTP output scanned; " +
                   std::to_string(fake.authorized()) + " authenticated provider calls");
}

// ---- CLI / HTTP parity -----------------------------------------------------------------

Outcome cli_http_parity() {
  Checks c;
  auto docs = testing::flow2_documents();
  std::string cli_policy, cli_plan;
  {
    TempDir ws;
    for (const char* f : {"config.json", "mock.json"}) fs::copy_file(testing::fixture(std::string("flow2/") + f), ws / f);
    std::string out, err;
    int rc = 0;
    for (const auto& [path, kind] : docs) {
      rc |= cli(ws.path(),
                {"ingest", path.string(), "--kind", std::string(to_string(kind)), "--title", path.filename().string()},
                out, err);
    }
    rc |= cli(ws.path(), {"index", "build"}, out, err);
    rc |= cli(ws.path(), {"session", "new", "--flow", "software_exploitable"}, out, err);
    rc |= cli(ws.path(), {"run", "flow2"}, out, err);
    std::string answers_file = testing::fixture("flow2/answers.json").string();
    rc |= cli(ws.path(), {"plan", "generate", "--answers", answers_file}, out, err);
    rc |= cli(ws.path(), {"export", "policy_list", "--format", "json", "--out", (ws / "policy.json").string()}, out, err);
    rc |= cli(ws.path(), {"export", "test_plan", "--format", "json", "--out", (ws / "plan.json").string()}, out, err);
    c.expect(rc == 0, "CLI run failed: " + err.substr(0, 300));
    cli_policy = testing::read_text(ws / "policy.json");
    cli_plan = testing::read_text(ws / "plan.json");
  }

  std::string http_policy, http_plan;
  {
    TempDir ws;
    for (const char* f : {"config.json", "mock.json"}) fs::copy_file(testing::fixture(std::string("flow2/") + f), ws / f);
    testing::ServiceHarness h(ws.path());
    for (const auto& [path, kind] : docs) {
      auto [s, b] = h.post("/v1/documents", {{"kind", to_string(kind)},
                                             {"title", path.filename().string()},
                                             {"body", testing::read_text(path)}});
      c.expect(s == 201, "POST /v1/documents: " + b.dump());
    }
    c.expect(h.post("/v1/index/build").first == 200, "POST /v1/index/build");
    auto [cs, created] = h.post("/v1/sessions", {{"flow", "software_exploitable"}});
    c.expect(cs == 201, "POST /v1/sessions");
    std::string id = created.value("session_id", std::string());
    std::string base = "/v1/sessions/" + id;
    c.expect(h.post(base + "/runs/flow2").first == 202, "POST runs/flow2");
    auto st = h.wait_job(id);
    c.expect(st["state"] == "succeeded", "flow2 job: " + st.dump());
    http_policy = h.get_text(base + "/artifacts/policy_list?format=json");
    json plan_body = {{"answers", json::parse(testing::read_text(testing::fixture("flow2/answers.json")))}};
    c.expect(h.post(base + "/steps/plan", plan_body).first == 202, "POST steps/plan");
    st = h.wait_job(id);
    c.expect(st["state"] == "succeeded", "plan job: " + st.dump());
    http_plan = h.get_text(base + "/plan?format=json");
  }
  c.expect(!cli_policy.empty() && cli_policy == http_policy, "policy_list bytes differ");
  c.expect(!cli_plan.empty() && cli_plan == http_plan, "test_plan bytes differ");
  return c.outcome("policy_list " + std::to_string(cli_policy.size()) + " bytes and test_plan " +
                   std::to_string(cli_plan.size()) + " bytes identical");
}

}  // namespace
}  // namespace hwthreat

int main() {
  using hwthreat::Outcome;
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"retrieval_oracle_equivalence", hwthreat::retrieval_oracle},
      {"chunker_properties", hwthreat::chunker_properties},
      {"flow1_golden_run", hwthreat::flow1_golden},
      {"flow2_golden_run", hwthreat::flow2_golden},
      {"test_plan_schema_totality", hwthreat::plan_schema_totality},
      {"crash_resume_equivalence", hwthreat::crash_resume},
      {"secret_hygiene", hwthreat::secret_hygiene},
      {"cli_http_parity", hwthreat::cli_http_parity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
