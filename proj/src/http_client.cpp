#include <httplib.h>

#include <thread>

#include "storyframe/llm_client.hpp"

namespace storyframe {

struct HttpChatClient::Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path below the origin, no trailing slash
};

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("base_url needs a scheme: " + url);
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw std::invalid_argument("unsupported scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace

HttpChatClient::HttpChatClient(ClientConfig config)
    : config_(std::move(config)), limiter_(config_.parallelism_limit) {
  config_.validate();
  auto [origin, prefix] = split_url(config_.base_url);
  endpoint_ = std::make_unique<Endpoint>(Endpoint{origin, prefix});
}

HttpChatClient::~HttpChatClient() = default;

std::string HttpChatClient::describe() const {
  return config_.base_url + " (" + (config_.model.empty() ? "default model" : config_.model) + ")";
}

Json HttpChatClient::post_with_retries(const std::string& path, const Json& body,
                                       std::vector<std::string>& log) {
  ConcurrencyLimiter::Slot slot(limiter_);
  const std::string payload = body.dump();
  LlmErrorKind last_kind = LlmErrorKind::unavailable;
  int last_status = 0;
  std::string last_message;

  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 1)));
    }
    httplib::Client client(endpoint_->origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto result = client.Post(endpoint_->prefix + path, headers, payload, "application/json");
    const std::string label = "attempt " + std::to_string(attempt + 1) + ": ";
    if (!result) {
      const auto err = result.error();
      last_kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                      ? LlmErrorKind::timeout
                      : LlmErrorKind::unavailable;
      last_status = 0;
      last_message = httplib::to_string(err);
      log.push_back(label + std::string(to_string(last_kind)) + " (" + last_message + ")");
      continue;
    }
    last_status = result->status;
    if (result->status == 429) {
      last_kind = LlmErrorKind::rate_limited;
      last_message = "rate limited";
      log.push_back(label + "RateLimited (429)");
      continue;
    }
    if (result->status >= 500) {
      last_kind = LlmErrorKind::http_error;
      last_message = "server error " + std::to_string(result->status);
      log.push_back(label + "HttpError (" + std::to_string(result->status) + ")");
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      log.push_back(label + "HttpError (" + std::to_string(result->status) + ")");
      throw LlmError(LlmErrorKind::http_error, "status " + std::to_string(result->status),
                     result->status, log);
    }
    Json parsed = Json::parse(result->body, nullptr, false);
    if (parsed.is_discarded()) {
      log.push_back(label + "InvalidResponse");
      throw LlmError(LlmErrorKind::invalid_response, "response body is not JSON", result->status,
                     log);
    }
    log.push_back(label + "ok (" + std::to_string(result->status) + ")");
    return parsed;
  }
  throw LlmError(last_kind, last_message + " after " + std::to_string(log.size()) + " attempt(s)",
                 last_status, log);
}

ChatResponse HttpChatClient::chat(const ChatRequest& request) {
  check_request(request);
  std::vector<std::string> log;
  ChatResponse response =
      parse_chat_response(post_with_retries("/chat/completions", chat_request_body(config_, request), log));
  response.attempts = static_cast<int>(log.size());
  response.attempt_log = std::move(log);
  return response;
}

std::vector<Embedding> HttpChatClient::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw LlmError(LlmErrorKind::precondition, "no texts to embed");
  Json body = {{"model", config_.embedding_model.empty() ? config_.model : config_.embedding_model},
               {"input", texts}};
  std::vector<std::string> log;
  return parse_embedding_response(post_with_retries("/embeddings", body, log), texts.size());
}

}  // namespace storyframe
