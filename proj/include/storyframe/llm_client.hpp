#pragma once

// Chat-completion and embedding clients. HttpChatClient speaks the
// OpenAI-compatible wire format; ScriptedChatClient replays canned replies so
// every higher-level test is deterministic.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace storyframe {

using Json = nlohmann::ordered_json;
using Embedding = std::vector<double>;

enum class Role { system, user, assistant };
std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<std::int64_t> seed;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int total_tokens = 0;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;
  TokenUsage usage;
  int attempts = 1;
  std::vector<std::string> attempt_log;
};

enum class LlmErrorKind { timeout, http_error, rate_limited, invalid_response, unavailable,
                          precondition };
std::string_view to_string(LlmErrorKind kind);

class LlmError : public std::runtime_error {
 public:
  LlmError(LlmErrorKind kind, std::string message, int status = 0,
           std::vector<std::string> attempt_log = {});
  LlmErrorKind kind() const { return kind_; }
  int status() const { return status_; }
  const std::vector<std::string>& attempt_log() const { return attempt_log_; }

 private:
  LlmErrorKind kind_;
  int status_;
  std::vector<std::string> attempt_log_;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  // One vector per input text. Throws LlmError(unavailable) when the client
  // has no embedding endpoint.
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts);
  // Endpoint and model, never the key.
  virtual std::string describe() const = 0;
};

// Throws LlmError(precondition) unless there is at least one user message.
void check_request(const ChatRequest& request);

struct ClientConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string api_key;
  std::string model;
  std::string embedding_model;
  double temperature = 0.7;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;
  int parallelism_limit = 4;
  std::chrono::milliseconds backoff_base{500};

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;

  // Reads <PREFIX>_BASE_URL, <PREFIX>_API_KEY, <PREFIX>_MODEL, e.g. with
  // prefix "LLM" or "JUDGE". Returns nullopt when the base URL is unset.
  static std::optional<ClientConfig> from_env(std::string_view prefix);
};

// Counting limiter shared by every call through one client.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit);
  void acquire();
  void release();

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Slot() { limiter_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter& limiter_;
  };

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ClientConfig config);
  ~HttpChatClient() override;

  ChatResponse chat(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
  std::string describe() const override;

  const ClientConfig& config() const { return config_; }

 private:
  struct Endpoint;
  // Appends one line per attempt to `log`.
  Json post_with_retries(const std::string& path, const Json& body, std::vector<std::string>& log);

  ClientConfig config_;
  std::unique_ptr<Endpoint> endpoint_;
  ConcurrencyLimiter limiter_;
};

// Request/response bodies of the chat-completions wire format.
Json chat_request_body(const ClientConfig& config, const ChatRequest& request);
ChatResponse parse_chat_response(const Json& body);
std::vector<Embedding> parse_embedding_response(const Json& body, std::size_t expected);

struct ScriptedReply {
  std::string content;
  std::optional<LlmErrorKind> error;
  int status = 0;
  std::chrono::milliseconds delay{0};

  static ScriptedReply text(std::string content) { return {std::move(content), {}, 0, {}}; }
  static ScriptedReply failure(LlmErrorKind kind, int status = 0) { return {{}, kind, status, {}}; }
};

// A scripted chat backend. Replies are chosen by the first rule whose
// `match` substring occurs in the last user message and which still has
// replies left; otherwise from the sequential script. A rule with
// repeat_last keeps returning its final reply once exhausted.
class ScriptedChatClient : public ChatClient {
 public:
  struct Rule {
    std::string match;
    std::vector<ScriptedReply> replies;
    bool repeat_last = false;
  };
  struct Call {
    std::vector<ChatMessage> messages;
    std::string reply;
  };

  ScriptedChatClient() = default;
  explicit ScriptedChatClient(std::vector<std::string> sequence);

  // Script file format:
  //   {"rules": [{"match": "...", "replies": ["..." | {"content": "..."} |
  //               {"error": "http_error", "status": 500}], "repeat_last": true}],
  //    "sequence": [...same reply forms...],
  //    "embeddings": {"dimension": 32, "vectors": {"text": [..]}}}
  static std::shared_ptr<ScriptedChatClient> from_json(const Json& script);

  void push(ScriptedReply reply);
  void add_rule(Rule rule);
  void set_embedding(std::string text, Embedding vector);
  // Vectors for texts without an explicit entry: a one-hot vector of this
  // dimension at a hash of the text. Zero disables embeddings.
  void set_embedding_dimension(std::size_t dimension);

  ChatResponse chat(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
  std::string describe() const override { return "scripted"; }

  std::vector<Call> calls() const;
  std::size_t call_count() const;
  int max_in_flight() const;

 private:
  std::optional<ScriptedReply> next_reply(const std::string& prompt);

  mutable std::mutex mutex_;
  std::vector<Rule> rules_;
  std::vector<std::size_t> rule_cursor_;
  std::vector<ScriptedReply> sequence_;
  std::size_t sequence_cursor_ = 0;
  std::vector<Call> calls_;
  std::map<std::string, Embedding> embeddings_;
  std::size_t embedding_dimension_ = 0;
  int in_flight_ = 0;
  int max_in_flight_ = 0;
};

// Last user message of a request, or "" if there is none.
std::string last_user_message(const std::vector<ChatMessage>& messages);

}  // namespace storyframe
