#pragma once

// The studio backend: frame sessions, builder ops, generation, judging and
// export. StoryService holds the logic and is usable in-process;
// HttpFrontend maps it onto REST routes.
//
//   POST   /frames                   create a session (optional "frame" or "ops")
//   GET    /frames/{id}              builder state, validation, story versions
//   PATCH  /frames/{id}              {"ops": [...]} applied atomically
//   POST   /frames/{id}/generate     commit, generate and evaluate
//   POST   /frames/{id}/evaluate     evaluate the latest (or "version") story
//   POST   /frames/{id}/regenerate   {"suggestion": "..."}
//   GET    /frames/{id}/export       {story, frame_json, diagram}
//
// Errors: 400 validation/schema, 404 unknown frame, 409 concurrent edit,
// 502 upstream model failure.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "storyframe/prompt_pipeline.hpp"
#include "storyframe/session_store.hpp"

namespace storyframe {

struct ServiceResponse {
  int status = 200;
  Json body;
};

struct ServiceClients {
  ChatClient* generator = nullptr;
  std::vector<ChatClient*> judges;  // empty disables evaluation
};

class StoryService {
 public:
  StoryService(SessionStore& store, const Pipeline& pipeline, ServiceClients clients,
               int judge_runs = 3);

  ServiceResponse create_frame(const Json& body);
  ServiceResponse get_frame(const std::string& id);
  ServiceResponse patch_frame(const std::string& id, const Json& body);
  ServiceResponse generate(const std::string& id, const Json& body);
  ServiceResponse evaluate(const std::string& id, const Json& body);
  ServiceResponse regenerate(const std::string& id, const Json& body);
  ServiceResponse export_bundle(const std::string& id);

 private:
  // Per-frame writer lock; not owned when another request holds it.
  std::unique_lock<std::mutex> try_lock(const std::string& id);
  Json frame_view(const Session& session) const;
  ServiceResponse evaluate_version(Session& session, std::size_t version);
  ServiceResponse add_version(const std::string& id, const Json& body, bool fresh);

  SessionStore& store_;
  const Pipeline& pipeline_;
  ServiceClients clients_;
  int judge_runs_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

class HttpFrontend {
 public:
  explicit HttpFrontend(StoryService& service);
  ~HttpFrontend();

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace storyframe
