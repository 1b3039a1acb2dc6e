#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "cxr/error.hpp"
#include "cxr/llm/backend.hpp"

#include <httplib.h>

namespace cxr::llm {

namespace {

void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("LLM endpoint must be an http(s) URL: " + endpoint);
  const auto slash = endpoint.find('/', scheme + 3);
  base = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
  path = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::Read || e == httplib::Error::Write || e == httplib::Error::ConnectionTimeout;
}

// Holds one slot of the in-flight cap for the duration of a request.
class Slot {
 public:
  explicit Slot(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~Slot() { s_.release(); }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

RemoteLlm::RemoteLlm(RemoteConfig config) : config_(std::move(config)) {
  if (config_.max_attempts < 1) throw ConfigError("remote LLM: max_attempts must be >= 1");
  if (config_.max_in_flight < 1) throw ConfigError("remote LLM: max_in_flight must be >= 1");
  split_endpoint(config_.endpoint, base_url_, path_);
  in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

std::string RemoteLlm::request_body(const PromptDocument& doc) const {
  std::string system = doc.instruction_text();
  system += (system.empty() ? "" : "\n") + kFormatHint;
  nlohmann::json body = {{"model", config_.model},
                         {"messages",
                          {{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", doc.body_text()}}}},
                         {"temperature", 0}};
  return body.dump();
}

std::string RemoteLlm::complete(const PromptDocument& doc) const {
  const char* key = std::getenv(kApiKeyEnv);
  if (!key || !*key) {
    throw ConfigError(std::string("remote LLM backend needs the ") + kApiKeyEnv + " environment variable");
  }
  const std::string body = request_body(doc);
  Slot slot(*in_flight_);

  httplib::Client client(base_url_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

  auto backoff = config_.initial_backoff;
  int last_status = 0;
  bool last_was_timeout = false;
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    auto res = client.Post(path_, headers, body, "application/json");
    if (res) {
      last_status = res->status;
      last_was_timeout = false;
      if (res->status == 200) {
        try {
          const auto j = nlohmann::json::parse(res->body);
          return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          throw TransportError(std::string("remote LLM returned a malformed completion: ") + e.what(), 200, attempt);
        }
      }
      last_error = "HTTP status " + std::to_string(res->status);
      const bool transient = res->status == 429 || res->status >= 500;
      if (!transient) throw TransportError("remote LLM request failed: " + last_error, res->status, attempt);
    } else {
      last_was_timeout = is_timeout(res.error());
      last_status = 0;
      last_error = httplib::to_string(res.error());
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  if (last_was_timeout) {
    throw TimeoutError("remote LLM timed out after " + std::to_string(config_.max_attempts) + " attempts",
                       config_.max_attempts);
  }
  throw TransportError("remote LLM request failed after " + std::to_string(config_.max_attempts) +
                           " attempts: " + last_error,
                       last_status, config_.max_attempts);
}

std::string remote_llm(const PromptDocument& doc, const std::string& endpoint, const std::string& model,
                       std::chrono::milliseconds timeout) {
  RemoteConfig config;
  config.endpoint = endpoint;
  config.model = model;
  config.timeout = timeout;
  return RemoteLlm(std::move(config)).complete(doc);
}

}  // namespace cxr::llm
