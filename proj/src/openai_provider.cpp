#include "hwthreat/openai_provider.hpp"

#include <httplib.h>

#include <cstdlib>

#include "hwthreat/error.hpp"

namespace hwthreat {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "provider endpoint must be an absolute URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

json post_json(const ProviderConfig& config, const std::string& path, const json& body) {
  Endpoint ep = split_endpoint(config.endpoint);
  httplib::Client client(ep.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (const char* key = std::getenv(config.api_key_ref.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(ep.prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
      throw Error(ErrorCode::kTimeout, "provider request timed out or was interrupted",
                  {{"error", httplib::to_string(res.error())}});
    }
    throw provider_error("provider transport error: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw provider_error("provider returned HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw provider_error("provider returned HTTP " + std::to_string(res->status), false);
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) throw provider_error("provider returned a non-JSON body", false);
  return parsed;
}

}  // namespace

OpenAiChatProvider::OpenAiChatProvider(ProviderConfig config) : config_(std::move(config)) {}

std::string OpenAiChatProvider::complete(std::string_view prompt) {
  json body = {{"model", config_.model_name},
               {"temperature", config_.temperature},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  json reply = post_json(config_, "/chat/completions", body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw provider_error("provider reply has no choices[0].message.content", false);
  }
}

OpenAiEmbedder::OpenAiEmbedder(ProviderConfig config, std::size_t dim)
    : config_(std::move(config)), dim_(dim) {}

std::vector<double> OpenAiEmbedder::embed_raw(std::string_view text) {
  json reply = post_json(config_, "/embeddings", {{"model", config_.model_name}, {"input", text}});
  try {
    return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw provider_error("provider reply has no data[0].embedding", false);
  }
}

}  // namespace hwthreat
