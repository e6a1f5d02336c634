#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "hwthreat/engine.hpp"
#include "hwthreat/error.hpp"

namespace httplib {
class Server;
}

namespace hwthreat {

// HTTP status for an error: client 400, not_found 404, conflict 409,
// upstream 502 (504 for timeouts), server 500.
int http_status_for(const Error& e);

// JSON API under /v1 (routes in docs/http_api.md). Long-running steps run
// as background jobs; GET .../status reports their progress.
class HttpService {
 public:
  explicit HttpService(Engine& engine);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound port,
  // or -1 when binding fails.
  int bind(const std::string& host, int port);
  // Serves until stop(); blocks.
  void serve();
  void stop();
  // Blocks until no background job is running.
  void wait_idle();

 private:
  struct Job {
    std::string state = "idle";  // idle | running | succeeded | failed
    std::string step;
    nlohmann::json result;
    nlohmann::json error;
  };

  void routes();
  // Starts `work` in the background for a session; throws kSessionBusy when
  // a job for that session is still running.
  void start_job(const std::string& session_id, const std::string& step,
                 std::function<nlohmann::json()> work);
  nlohmann::json job_status(const std::string& session_id);

  Engine& engine_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex mu_;
  std::condition_variable idle_cv_;
  std::map<std::string, Job> jobs_;
  std::map<std::string, std::thread> threads_;  // last job per session
  std::size_t running_ = 0;
};

}  // namespace hwthreat
