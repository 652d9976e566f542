#include "storyframe/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>

namespace storyframe {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(LlmErrorKind kind) {
  switch (kind) {
    case LlmErrorKind::timeout: return "Timeout";
    case LlmErrorKind::http_error: return "HttpError";
    case LlmErrorKind::rate_limited: return "RateLimited";
    case LlmErrorKind::invalid_response: return "InvalidResponse";
    case LlmErrorKind::unavailable: return "LlmUnavailable";
    case LlmErrorKind::precondition: return "Precondition";
  }
  return "LlmUnavailable";
}

LlmError::LlmError(LlmErrorKind kind, std::string message, int status,
                   std::vector<std::string> attempt_log)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      status_(status),
      attempt_log_(std::move(attempt_log)) {}

std::vector<Embedding> ChatClient::embed(const std::vector<std::string>&) {
  throw LlmError(LlmErrorKind::unavailable, describe() + " has no embedding endpoint");
}

void check_request(const ChatRequest& request) {
  const bool has_user = std::any_of(request.messages.begin(), request.messages.end(),
                                    [](const ChatMessage& m) { return m.role == Role::user; });
  if (!has_user) {
    throw LlmError(LlmErrorKind::precondition, "a chat request needs at least one user message");
  }
}

std::string last_user_message(const std::vector<ChatMessage>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::user) return it->content;
  }
  return {};
}

void ClientConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("base_url must be set");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw std::invalid_argument("temperature must be within [0, 2]");
  }
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
  if (timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
  if (parallelism_limit <= 0) throw std::invalid_argument("parallelism_limit must be positive");
}

std::optional<ClientConfig> ClientConfig::from_env(std::string_view prefix) {
  auto get = [&](const char* suffix) -> std::string {
    const std::string name = std::string(prefix) + "_" + suffix;
    const char* value = std::getenv(name.c_str());
    return value ? value : "";
  };
  ClientConfig config;
  config.base_url = get("BASE_URL");
  if (config.base_url.empty()) return std::nullopt;
  config.api_key = get("API_KEY");
  config.model = get("MODEL");
  return config;
}

ConcurrencyLimiter::ConcurrencyLimiter(int limit) : available_(std::max(limit, 1)) {}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

Json chat_request_body(const ClientConfig& config, const ChatRequest& request) {
  Json messages = Json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  Json body = {{"model", config.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature.value_or(config.temperature)},
               {"max_tokens", request.max_tokens.value_or(config.max_tokens)},
               {"stream", false}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

ChatResponse parse_chat_response(const Json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    ChatResponse response;
    const auto& content = choice.at("message").at("content");
    response.content = content.is_null() ? "" : content.get<std::string>();
    if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) {
      response.finish_reason = it->get<std::string>();
    }
    if (auto it = body.find("usage"); it != body.end() && it->is_object()) {
      response.usage.prompt_tokens = it->value("prompt_tokens", 0);
      response.usage.completion_tokens = it->value("completion_tokens", 0);
      response.usage.total_tokens = it->value("total_tokens", 0);
    }
    return response;
  } catch (const Json::exception& e) {
    throw LlmError(LlmErrorKind::invalid_response,
                   std::string("malformed chat-completions body: ") + e.what());
  }
}

std::vector<Embedding> parse_embedding_response(const Json& body, std::size_t expected) {
  try {
    const auto& data = body.at("data");
    if (data.size() != expected) {
      throw LlmError(LlmErrorKind::invalid_response,
                     "expected " + std::to_string(expected) + " embeddings, got " +
                         std::to_string(data.size()));
    }
    std::vector<Embedding> out(expected);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& item = data[i];
      const std::size_t index = item.contains("index") ? item.at("index").get<std::size_t>() : i;
      if (index >= expected || !out[index].empty()) {
        throw LlmError(LlmErrorKind::invalid_response, "embedding index out of range or repeated");
      }
      out[index] = item.at("embedding").get<Embedding>();
    }
    for (const auto& v : out) {
      if (v.empty() || v.size() != out.front().size()) {
        throw LlmError(LlmErrorKind::invalid_response, "embedding dimensionality mismatch");
      }
    }
    return out;
  } catch (const Json::exception& e) {
    throw LlmError(LlmErrorKind::invalid_response,
                   std::string("malformed embeddings body: ") + e.what());
  }
}

ScriptedChatClient::ScriptedChatClient(std::vector<std::string> sequence) {
  for (auto& text : sequence) sequence_.push_back(ScriptedReply::text(std::move(text)));
}

namespace {

ScriptedReply reply_from_json(const Json& value) {
  if (value.is_string()) return ScriptedReply::text(value.get<std::string>());
  ScriptedReply reply;
  reply.content = value.value("content", "");
  if (value.contains("error")) {
    const auto name = value.at("error").get<std::string>();
    static const std::map<std::string, LlmErrorKind> kinds{
        {"timeout", LlmErrorKind::timeout},
        {"http_error", LlmErrorKind::http_error},
        {"rate_limited", LlmErrorKind::rate_limited},
        {"invalid_response", LlmErrorKind::invalid_response},
        {"unavailable", LlmErrorKind::unavailable}};
    auto it = kinds.find(name);
    if (it == kinds.end()) throw std::invalid_argument("unknown scripted error '" + name + "'");
    reply.error = it->second;
    reply.status = value.value("status", 0);
  }
  reply.delay = std::chrono::milliseconds(value.value("delay_ms", 0));
  return reply;
}

}  // namespace

std::shared_ptr<ScriptedChatClient> ScriptedChatClient::from_json(const Json& script) {
  auto client = std::make_shared<ScriptedChatClient>();
  for (const auto& rule : script.value("rules", Json::array())) {
    Rule r;
    r.match = rule.value("match", "");
    for (const auto& reply : rule.at("replies")) r.replies.push_back(reply_from_json(reply));
    r.repeat_last = rule.value("repeat_last", false);
    client->add_rule(std::move(r));
  }
  for (const auto& reply : script.value("sequence", Json::array())) {
    client->push(reply_from_json(reply));
  }
  if (script.contains("embeddings")) {
    const auto& emb = script.at("embeddings");
    client->set_embedding_dimension(emb.value("dimension", std::size_t{0}));
    const Json vectors = emb.value("vectors", Json::object());
    for (const auto& [text, vec] : vectors.items()) {
      client->set_embedding(text, vec.get<Embedding>());
    }
  }
  return client;
}

void ScriptedChatClient::push(ScriptedReply reply) {
  std::lock_guard lock(mutex_);
  sequence_.push_back(std::move(reply));
}

void ScriptedChatClient::add_rule(Rule rule) {
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
  rule_cursor_.push_back(0);
}

void ScriptedChatClient::set_embedding(std::string text, Embedding vector) {
  std::lock_guard lock(mutex_);
  embeddings_[std::move(text)] = std::move(vector);
}

void ScriptedChatClient::set_embedding_dimension(std::size_t dimension) {
  std::lock_guard lock(mutex_);
  embedding_dimension_ = dimension;
}

std::optional<ScriptedReply> ScriptedChatClient::next_reply(const std::string& prompt) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto& rule = rules_[i];
    if (rule.replies.empty() || prompt.find(rule.match) == std::string::npos) continue;
    auto& cursor = rule_cursor_[i];
    if (cursor < rule.replies.size()) return rule.replies[cursor++];
    if (rule.repeat_last) return rule.replies.back();
  }
  if (sequence_cursor_ < sequence_.size()) return sequence_[sequence_cursor_++];
  return std::nullopt;
}

ChatResponse ScriptedChatClient::chat(const ChatRequest& request) {
  check_request(request);
  std::optional<ScriptedReply> reply;
  {
    std::lock_guard lock(mutex_);
    reply = next_reply(last_user_message(request.messages));
    ++in_flight_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
    calls_.push_back({request.messages, reply && !reply->error ? reply->content : ""});
  }
  if (reply && reply->delay.count() > 0) std::this_thread::sleep_for(reply->delay);
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  if (!reply) throw LlmError(LlmErrorKind::unavailable, "scripted client has no reply left");
  if (reply->error) {
    throw LlmError(*reply->error, "scripted failure", reply->status,
                   {"scripted " + std::string(to_string(*reply->error))});
  }
  ChatResponse response;
  response.content = reply->content;
  response.finish_reason = "stop";
  return response;
}

std::vector<Embedding> ScriptedChatClient::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw LlmError(LlmErrorKind::precondition, "no texts to embed");
  std::lock_guard lock(mutex_);
  std::vector<Embedding> out;
  for (const auto& text : texts) {
    if (auto it = embeddings_.find(text); it != embeddings_.end()) {
      out.push_back(it->second);
    } else if (embedding_dimension_ > 0) {
      Embedding v(embedding_dimension_, 0.0);
      v[std::hash<std::string>{}(text) % embedding_dimension_] = 1.0;
      out.push_back(std::move(v));
    } else {
      throw LlmError(LlmErrorKind::unavailable, "scripted client has no embedding for '" + text + "'");
    }
  }
  for (const auto& v : out) {
    if (v.size() != out.front().size()) {
      throw LlmError(LlmErrorKind::invalid_response, "embedding dimensionality mismatch");
    }
  }
  return out;
}

std::vector<ScriptedChatClient::Call> ScriptedChatClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ScriptedChatClient::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

int ScriptedChatClient::max_in_flight() const {
  std::lock_guard lock(mutex_);
  return max_in_flight_;
}

}  // namespace storyframe
