#include "storyframe/session_store.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "storyframe/digest.hpp"
#include "storyframe/io.hpp"

namespace storyframe {

namespace {

constexpr std::string_view kMagic = "storyframe-session 1 ";

bool valid_frame_id(const std::string& id) {
  constexpr std::string_view prefix = "frame_";
  if (id.size() <= prefix.size() || id.compare(0, prefix.size(), prefix) != 0) return false;
  return std::all_of(id.begin() + prefix.size(), id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json to_json(const Session& s) {
  Json versions = Json::array();
  for (const auto& v : s.story_versions) {
    versions.push_back({{"story", v.story},
                        {"kind", v.kind},
                        {"prompt", v.prompt},
                        {"suggestion", v.suggestion},
                        {"report", v.report ? *v.report : Json(nullptr)},
                        {"evaluated", v.report.has_value()}});
  }
  return {{"frame_id", s.frame_id},
          {"created", s.created},
          {"updated", s.updated},
          {"builder", s.builder.to_json()},
          {"story_versions", versions},
          {"transcripts", s.transcripts}};
}

Session session_from_json(const Json& doc) {
  Session s;
  s.frame_id = doc.at("frame_id").get<std::string>();
  s.created = doc.at("created").get<std::string>();
  s.updated = doc.at("updated").get<std::string>();
  s.builder = FrameBuilder::from_json(doc.at("builder"));
  for (const auto& v : doc.at("story_versions")) {
    StoryVersion version;
    version.story = v.at("story").get<std::string>();
    version.kind = v.at("kind").get<std::string>();
    version.prompt = v.at("prompt").get<std::string>();
    version.suggestion = v.at("suggestion").get<std::string>();
    if (!v.at("report").is_null()) version.report = v.at("report");
    s.story_versions.push_back(std::move(version));
  }
  s.transcripts = doc.at("transcripts");
  return s;
}

std::string encode_session(const Session& session) {
  const auto body = to_json(session).dump(2) + "\n";
  return std::string(kMagic) + std::to_string(body.size()) + " " + sha256_hex(body) + "\n" + body;
}

Session decode_session(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos || bytes.compare(0, kMagic.size(), kMagic) != 0) {
    throw CorruptSession("missing session header");
  }
  const auto header = bytes.substr(kMagic.size(), newline - kMagic.size());
  const auto space = header.find(' ');
  if (space == std::string::npos) throw CorruptSession("malformed session header");
  std::size_t length = 0;
  try {
    length = std::stoul(header.substr(0, space));
  } catch (const std::exception&) {
    throw CorruptSession("malformed session length");
  }
  const auto digest = header.substr(space + 1);
  const auto body = bytes.substr(newline + 1);
  if (body.size() != length) {
    throw CorruptSession("session body has " + std::to_string(body.size()) + " bytes, header says " +
                         std::to_string(length));
  }
  if (sha256_hex(body) != digest) throw CorruptSession("session digest mismatch");
  try {
    return session_from_json(Json::parse(body));
  } catch (const std::exception& e) {
    throw CorruptSession(std::string("unreadable session body: ") + e.what());
  }
}

SessionStore::SessionStore(std::filesystem::path data_dir) : dir_(std::move(data_dir) / "sessions") {
  std::filesystem::create_directories(dir_);
  for (const auto& id : list()) {
    next_id_ = std::max<unsigned>(next_id_, std::stoul(id.substr(6)) + 1);
  }
}

std::string SessionStore::allocate_id() {
  std::lock_guard lock(mutex_);
  return "frame_" + std::to_string(next_id_++);
}

std::filesystem::path SessionStore::path_for(const std::string& frame_id) const {
  if (!valid_frame_id(frame_id)) throw UnknownSession("no frame '" + frame_id + "'");
  return dir_ / (frame_id + ".session");
}

void SessionStore::save(const Session& session) {
  write_file_atomic(path_for(session.frame_id), encode_session(session));
}

Session SessionStore::load(const std::string& frame_id) const {
  const auto path = path_for(frame_id);
  if (!std::filesystem::exists(path)) throw UnknownSession("no frame '" + frame_id + "'");
  return decode_session(read_file(path));
}

bool SessionStore::exists(const std::string& frame_id) const {
  return valid_frame_id(frame_id) && std::filesystem::exists(path_for(frame_id));
}

std::vector<std::string> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".session") continue;
    const auto id = entry.path().stem().string();
    if (valid_frame_id(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace storyframe
