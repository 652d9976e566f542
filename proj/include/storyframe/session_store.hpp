#pragma once

// File-backed studio sessions: one file per frame under <data>/sessions.
//
// File layout: a header line `storyframe-session 1 <bytes> <sha256>`
// followed by the JSON body. A missing, short or altered body fails the
// digest check on load.

#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "storyframe/frame_graph.hpp"
#include "storyframe/judge.hpp"

namespace storyframe {

class CorruptSession : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownSession : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoryVersion {
  std::string story;
  std::string kind;  // "generate" or "regenerate"
  std::string prompt;
  std::string suggestion;          // revision request, regenerate only
  std::optional<Json> report;      // EvaluationReport JSON; nullopt = unevaluated
};

struct Session {
  std::string frame_id;
  FrameBuilder builder;
  std::vector<StoryVersion> story_versions;  // append-only
  Json transcripts = Json::array();          // [{action, version, entries}]
  std::string created;
  std::string updated;
};

Json to_json(const Session& session);
Session session_from_json(const Json& doc);

// Serialized bytes including the digest header.
std::string encode_session(const Session& session);
// Throws CorruptSession.
Session decode_session(const std::string& bytes);

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path data_dir);

  // Reserves the next `frame_<n>` id.
  std::string allocate_id();
  std::filesystem::path path_for(const std::string& frame_id) const;

  void save(const Session& session);
  // Throws UnknownSession or CorruptSession.
  Session load(const std::string& frame_id) const;
  bool exists(const std::string& frame_id) const;
  std::vector<std::string> list() const;

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  unsigned next_id_ = 1;
};

// UTC time as 2024-01-02T03:04:05Z.
std::string utc_timestamp();

}  // namespace storyframe
