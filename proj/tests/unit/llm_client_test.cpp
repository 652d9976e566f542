#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "storyframe/llm_client.hpp"

namespace storyframe {
namespace {

Json chat_body(const std::string& content) {
  return {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}}},
          {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 2}, {"total_tokens", 5}}}};
}

ChatRequest user_request(const std::string& text) {
  ChatRequest r;
  r.messages.push_back({Role::user, text});
  return r;
}

// Local stand-in for a chat-completions server.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", handler);
    server_.Post("/v1/embeddings", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  ClientConfig config() const {
    ClientConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    c.model = "stub-model";
    c.api_key = "secret";
    c.backoff_base = std::chrono::milliseconds(1);
    c.timeout = std::chrono::milliseconds(5000);
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(ScriptedClient, RepliesInOrderAndRecordsCalls) {
  ScriptedChatClient client({"one", "two"});
  EXPECT_EQ(client.chat(user_request("a")).content, "one");
  EXPECT_EQ(client.chat(user_request("b")).content, "two");
  EXPECT_THROW(client.chat(user_request("c")), LlmError);
  ASSERT_EQ(client.calls().size(), 3u);
  EXPECT_EQ(client.calls()[1].messages[0].content, "b");
  EXPECT_EQ(client.calls()[1].reply, "two");
}

TEST(ScriptedClient, RulesTakePrecedenceAndRepeat) {
  ScriptedChatClient client({"fallback"});
  client.add_rule({"needle", {ScriptedReply::text("r1"), ScriptedReply::text("r2")}, true});
  EXPECT_EQ(client.chat(user_request("has needle")).content, "r1");
  EXPECT_EQ(client.chat(user_request("no match")).content, "fallback");
  EXPECT_EQ(client.chat(user_request("needle")).content, "r2");
  EXPECT_EQ(client.chat(user_request("needle again")).content, "r2");
}

TEST(ScriptedClient, ScriptedFailures) {
  ScriptedChatClient client;
  client.push(ScriptedReply::failure(LlmErrorKind::rate_limited, 429));
  try {
    client.chat(user_request("x"));
    FAIL();
  } catch (const LlmError& e) {
    EXPECT_EQ(e.kind(), LlmErrorKind::rate_limited);
    EXPECT_EQ(e.status(), 429);
  }
}

TEST(ScriptedClient, FromJson) {
  const auto client = ScriptedChatClient::from_json(Json::parse(R"({
    "rules": [{"match": "m", "replies": ["a", {"error": "http_error", "status": 500}]}],
    "sequence": [{"content": "s"}],
    "embeddings": {"dimension": 4, "vectors": {"hello": [1, 0, 0, 0]}}})"));
  EXPECT_EQ(client->chat(user_request("m")).content, "a");
  EXPECT_THROW(client->chat(user_request("m")), LlmError);
  EXPECT_EQ(client->chat(user_request("m")).content, "s");
  EXPECT_EQ(client->embed({"hello"})[0], (Embedding{1, 0, 0, 0}));
}

TEST(Preconditions, RequestNeedsUserMessage) {
  ChatRequest r;
  r.messages.push_back({Role::system, "sys"});
  ScriptedChatClient client({"x"});
  try {
    client.chat(r);
    FAIL();
  } catch (const LlmError& e) {
    EXPECT_EQ(e.kind(), LlmErrorKind::precondition);
  }
}

TEST(Embeddings, ScriptedVectors) {
  ScriptedChatClient client;
  EXPECT_THROW(client.embed({}), LlmError);
  EXPECT_THROW(client.embed({"x"}), LlmError);
  client.set_embedding_dimension(8);
  const auto v = client.embed({"same", "same"});
  EXPECT_EQ(v[0], v[1]);
  client.set_embedding("odd", {1, 2});
  try {
    client.embed({"odd", "same"});
    FAIL();
  } catch (const LlmError& e) {
    EXPECT_EQ(e.kind(), LlmErrorKind::invalid_response);
  }
}

TEST(WireFormat, RequestBody) {
  ClientConfig config;
  config.base_url = "http://x";
  config.model = "m";
  ChatRequest r = user_request("hello");
  r.messages.insert(r.messages.begin(), {Role::system, "be brief"});
  r.seed = 7;
  const auto body = chat_request_body(config, r);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1], (Json{{"role", "user"}, {"content", "hello"}}));
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
  EXPECT_EQ(body["max_tokens"], 1024);
  EXPECT_EQ(body["stream"], false);
  EXPECT_EQ(body["seed"], 7);
  r.temperature = 0.0;
  EXPECT_DOUBLE_EQ(chat_request_body(config, r)["temperature"].get<double>(), 0.0);
}

TEST(WireFormat, ResponseParsing) {
  const auto response = parse_chat_response(chat_body("hi"));
  EXPECT_EQ(response.content, "hi");
  EXPECT_EQ(response.finish_reason, "stop");
  EXPECT_EQ(response.usage.total_tokens, 5);
  EXPECT_THROW(parse_chat_response(Json{{"choices", Json::array()}}), LlmError);
  const Json emb = {{"data", {{{"index", 1}, {"embedding", {0, 1}}}, {{"index", 0}, {"embedding", {1, 0}}}}}};
  EXPECT_EQ(parse_embedding_response(emb, 2), (std::vector<Embedding>{{1, 0}, {0, 1}}));
  EXPECT_THROW(parse_embedding_response(emb, 3), LlmError);
}

TEST(ClientConfig, Validation) {
  ClientConfig c;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.base_url = "http://x";
  EXPECT_NO_THROW(c.validate());
  c.temperature = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.temperature = 1;
  c.parallelism_limit = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.parallelism_limit = 1;
  c.base_url = "ftp://x";
  EXPECT_THROW(HttpChatClient{c}, std::invalid_argument);
}

TEST(HttpClient, RetriesRateLimitThenSucceeds) {
  std::atomic<int> hits{0};
  std::string auth, path_body;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    path_body = req.body;
    if (++hits <= 2) {
      res.status = 429;
      return;
    }
    res.set_content(chat_body("done").dump(), "application/json");
  });
  HttpChatClient client(server.config());
  const auto response = client.chat(user_request("hello"));
  EXPECT_EQ(response.content, "done");
  EXPECT_EQ(response.attempts, 3);
  ASSERT_EQ(response.attempt_log.size(), 3u);
  EXPECT_NE(response.attempt_log[0].find("RateLimited"), std::string::npos);
  EXPECT_NE(response.attempt_log[2].find("ok"), std::string::npos);
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(Json::parse(path_body)["messages"][0]["content"], "hello");
  EXPECT_EQ(client.describe().find("secret"), std::string::npos);
}

TEST(HttpClient, ServerErrorWithoutRetries) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  auto config = server.config();
  config.max_retries = 0;
  HttpChatClient client(config);
  try {
    client.chat(user_request("x"));
    FAIL();
  } catch (const LlmError& e) {
    EXPECT_EQ(e.kind(), LlmErrorKind::http_error);
    EXPECT_EQ(e.status(), 500);
    EXPECT_EQ(e.attempt_log().size(), 1u);
  }
  EXPECT_EQ(hits.load(), 1);
}

TEST(HttpClient, ClientErrorIsNotRetried) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  HttpChatClient client(server.config());
  EXPECT_THROW(client.chat(user_request("x")), LlmError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(HttpClient, MalformedBodyIsInvalidResponse) {
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  HttpChatClient client(server.config());
  try {
    client.chat(user_request("x"));
    FAIL();
  } catch (const LlmError& e) {
    EXPECT_EQ(e.kind(), LlmErrorKind::invalid_response);
  }
}

TEST(HttpClient, UnreachableServer) {
  ClientConfig config;
  config.base_url = "http://127.0.0.1:1/v1";
  config.max_retries = 1;
  config.backoff_base = std::chrono::milliseconds(1);
  config.timeout = std::chrono::milliseconds(500);
  HttpChatClient client(config);
  try {
    client.chat(user_request("x"));
    FAIL();
  } catch (const LlmError& e) {
    EXPECT_TRUE(e.kind() == LlmErrorKind::unavailable || e.kind() == LlmErrorKind::timeout);
    EXPECT_EQ(e.attempt_log().size(), 2u);
  }
}

TEST(HttpClient, EmbeddingsRoundTrip) {
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = Json::parse(req.body);
    Json data = Json::array();
    for (std::size_t i = 0; i < body["input"].size(); ++i) data.push_back({{"index", i}, {"embedding", {1.0, double(i)}}});
    res.set_content(Json{{"data", data}}.dump(), "application/json");
  });
  HttpChatClient client(server.config());
  EXPECT_EQ(client.embed({"a", "b"}), (std::vector<Embedding>{{1, 0}, {1, 1}}));
  EXPECT_THROW(client.embed({}), LlmError);
}

TEST(HttpClient, ParallelismLimitCapsInFlightRequests) {
  std::atomic<int> in_flight{0}, peak{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --in_flight;
    res.set_content(chat_body("ok").dump(), "application/json");
  });
  auto config = server.config();
  config.parallelism_limit = 2;
  HttpChatClient client(config);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { client.chat(user_request("x")); });
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

}  // namespace
}  // namespace storyframe
