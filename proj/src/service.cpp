#include "storyframe/service.hpp"

#include "storyframe/judge.hpp"

namespace storyframe {

namespace {

ServiceResponse error(int status, std::string_view code, const std::string& message, Json extra = {}) {
  Json body = {{"error", code}, {"message", message}};
  if (extra.is_object()) {
    for (auto& [k, v] : extra.items()) body[k] = v;
  }
  return {status, std::move(body)};
}

ServiceResponse validation_error(const ValidationReport& report) {
  return error(400, "ValidationFailed", "the frame does not validate",
               {{"violations", to_json(report)["violations"]}});
}

ServiceResponse upstream_error(const PipelineError& e) {
  Json excerpt = Json::array();
  const auto& t = e.transcript();
  const std::size_t from = t.size() > 3 ? t.size() - 3 : 0;
  for (std::size_t i = from; i < t.size(); ++i) {
    excerpt.push_back({{"step", t[i].step},
                       {"attempt", t[i].attempt},
                       {"response", t[i].response.substr(0, 500)},
                       {"error", t[i].error}});
  }
  return error(502, "UpstreamFailure", e.what(),
               {{"kind", to_string(e.kind())}, {"step", e.step()}, {"transcript", excerpt}});
}

ServiceResponse builder_error(const BuilderError& e, std::size_t op_index) {
  return error(400, to_string(e.code()), e.what(), {{"subjects", e.subjects()}, {"op_index", op_index}});
}

Json version_view(const StoryVersion& v, std::size_t index) {
  return {{"version", index},
          {"kind", v.kind},
          {"story", v.story},
          {"suggestion", v.suggestion},
          {"evaluated", v.report.has_value()},
          {"report", v.report ? *v.report : Json(nullptr)}};
}

void record(Session& session, const std::string& action, std::size_t version, const Transcript& t) {
  session.transcripts.push_back({{"action", action}, {"version", version}, {"entries", to_json(t)}});
}

}  // namespace

StoryService::StoryService(SessionStore& store, const Pipeline& pipeline, ServiceClients clients,
                           int judge_runs)
    : store_(store), pipeline_(pipeline), clients_(std::move(clients)), judge_runs_(judge_runs) {}

std::unique_lock<std::mutex> StoryService::try_lock(const std::string& id) {
  std::mutex* m = nullptr;
  {
    std::lock_guard guard(locks_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    m = slot.get();
  }
  return std::unique_lock<std::mutex>(*m, std::try_to_lock);
}

Json StoryService::frame_view(const Session& s) const {
  Json versions = Json::array();
  for (std::size_t i = 0; i < s.story_versions.size(); ++i) {
    versions.push_back(version_view(s.story_versions[i], i));
  }
  Json attachments = Json::object();
  for (const auto& [event, entities] : s.builder.attachments()) attachments[event] = entities;
  return {{"frame_id", s.frame_id},
          {"created", s.created},
          {"updated", s.updated},
          {"frame", to_json_document(s.builder.draft())},
          {"attachments", attachments},
          {"validation", to_json(s.builder.validate())},
          {"story_versions", versions}};
}

ServiceResponse StoryService::create_frame(const Json& body) {
  if (!body.is_object()) return error(400, "SchemaViolation", "request body must be a JSON object");
  FrameBuilder builder;
  if (body.contains("frame")) {
    try {
      builder = FrameBuilder::from_frame(from_json_document(body.at("frame")));
    } catch (const FrameParseError& e) {
      return validation_error(e.report());
    }
  }
  Json results = Json::array();
  if (body.contains("ops")) {
    if (!body.at("ops").is_array()) return error(400, "SchemaViolation", "ops must be an array");
    for (std::size_t i = 0; i < body.at("ops").size(); ++i) {
      try {
        results.push_back(apply_builder_op(builder, body.at("ops")[i]));
      } catch (const BuilderError& e) {
        return builder_error(e, i);
      }
    }
  }
  Session session;
  session.frame_id = store_.allocate_id();
  session.builder = std::move(builder);
  session.created = session.updated = utc_timestamp();
  store_.save(session);
  auto view = frame_view(session);
  view["results"] = results;
  return {201, view};
}

ServiceResponse StoryService::get_frame(const std::string& id) {
  try {
    return {200, frame_view(store_.load(id))};
  } catch (const UnknownSession& e) {
    return error(404, "UnknownFrame", e.what());
  } catch (const CorruptSession& e) {
    return error(500, "CorruptSession", e.what());
  }
}

ServiceResponse StoryService::patch_frame(const std::string& id, const Json& body) {
  if (!store_.exists(id)) return error(404, "UnknownFrame", "no frame '" + id + "'");
  if (!body.is_object() || !body.contains("ops") || !body.at("ops").is_array()) {
    return error(400, "SchemaViolation", "body must be {\"ops\": [...]}");
  }
  auto lock = try_lock(id);
  if (!lock.owns_lock()) return error(409, "Conflict", "frame '" + id + "' is being modified");
  Session session = store_.load(id);
  FrameBuilder builder = session.builder;
  Json results = Json::array();
  for (std::size_t i = 0; i < body.at("ops").size(); ++i) {
    try {
      results.push_back(apply_builder_op(builder, body.at("ops")[i]));
    } catch (const BuilderError& e) {
      return builder_error(e, i);
    }
  }
  session.builder = std::move(builder);
  session.updated = utc_timestamp();
  store_.save(session);
  auto view = frame_view(session);
  view["results"] = results;
  return {200, view};
}

ServiceResponse StoryService::evaluate_version(Session& session, std::size_t index) {
  auto& version = session.story_versions.at(index);
  const auto frame_json = to_canonical_json(session.builder.commit());
  try {
    auto report = judge_story(pipeline_, version.story, frame_json, clients_.judges, judge_runs_);
    record(session, "evaluate", index, report.transcript);
    version.report = to_json(report);
    return {200, version_view(version, index)};
  } catch (const PipelineError& e) {
    record(session, "evaluate", index, e.transcript());
    return upstream_error(e);
  }
}

ServiceResponse StoryService::generate(const std::string& id, const Json& body) {
  return add_version(id, body, true);
}

ServiceResponse StoryService::regenerate(const std::string& id, const Json& body) {
  return add_version(id, body, false);
}

ServiceResponse StoryService::add_version(const std::string& id, const Json& body, bool fresh) {
  if (!store_.exists(id)) return error(404, "UnknownFrame", "no frame '" + id + "'");
  if (!body.is_null() && !body.is_object()) {
    return error(400, "SchemaViolation", "request body must be a JSON object");
  }
  if (!clients_.generator) return error(503, "GenerationDisabled", "no generation model is configured");
  auto lock = try_lock(id);
  if (!lock.owns_lock()) return error(409, "Conflict", "frame '" + id + "' is being modified");
  Session session = store_.load(id);
  StoryFrame frame;
  try {
    frame = session.builder.commit();
  } catch (const ValidationFailed& e) {
    return validation_error(e.report());
  }

  StoryVersion version;
  try {
    GenerationResult result;
    if (fresh) {
      result = pipeline_.generate_story(frame, *clients_.generator);
    } else {
      if (session.story_versions.empty()) {
        return error(400, "NoStory", "generate a story before regenerating");
      }
      const auto& previous = session.story_versions.back();
      std::string suggestion;
      if (body.is_object() && body.contains("suggestion")) {
        if (!body.at("suggestion").is_string()) {
          return error(400, "SchemaViolation", "suggestion must be a string");
        }
        suggestion = body.at("suggestion").get<std::string>();
      } else if (previous.report) {
        suggestion = previous.report->value("suggestion", "");
      }
      result = pipeline_.regenerate_story(frame, previous.story, suggestion, *clients_.generator);
      version.suggestion = suggestion;
    }
    version.story = result.story;
    version.prompt = result.prompt;
    version.kind = fresh ? "generate" : "regenerate";
    session.story_versions.push_back(version);
    record(session, version.kind, session.story_versions.size() - 1, result.transcript);
  } catch (const PipelineError& e) {
    record(session, fresh ? "generate" : "regenerate", session.story_versions.size(), e.transcript());
    session.updated = utc_timestamp();
    store_.save(session);
    return upstream_error(e);
  }

  ServiceResponse response{200, version_view(session.story_versions.back(),
                                             session.story_versions.size() - 1)};
  if (!clients_.judges.empty()) response = evaluate_version(session, session.story_versions.size() - 1);
  session.updated = utc_timestamp();
  store_.save(session);
  return response;
}

ServiceResponse StoryService::evaluate(const std::string& id, const Json& body) {
  if (!store_.exists(id)) return error(404, "UnknownFrame", "no frame '" + id + "'");
  if (clients_.judges.empty()) return error(503, "EvaluationDisabled", "no judge model is configured");
  auto lock = try_lock(id);
  if (!lock.owns_lock()) return error(409, "Conflict", "frame '" + id + "' is being modified");
  Session session = store_.load(id);
  if (session.story_versions.empty()) return error(400, "NoStory", "the frame has no story yet");
  std::size_t index = session.story_versions.size() - 1;
  if (body.is_object() && body.contains("version")) {
    const auto& v = body.at("version");
    if (!v.is_number_unsigned() || v.get<std::size_t>() >= session.story_versions.size()) {
      return error(400, "SchemaViolation", "version is out of range");
    }
    index = v.get<std::size_t>();
  }
  if (session.story_versions[index].report) {
    return {200, version_view(session.story_versions[index], index)};
  }
  try {
    session.builder.commit();
  } catch (const ValidationFailed& e) {
    return validation_error(e.report());
  }
  auto response = evaluate_version(session, index);
  session.updated = utc_timestamp();
  store_.save(session);
  return response;
}

ServiceResponse StoryService::export_bundle(const std::string& id) {
  Session session;
  try {
    session = store_.load(id);
  } catch (const UnknownSession& e) {
    return error(404, "UnknownFrame", e.what());
  } catch (const CorruptSession& e) {
    return error(500, "CorruptSession", e.what());
  }
  if (session.story_versions.empty()) return error(400, "NoStory", "the frame has no story yet");
  StoryFrame frame;
  try {
    frame = session.builder.commit();
  } catch (const ValidationFailed& e) {
    return validation_error(e.report());
  }
  const auto& latest = session.story_versions.back();
  return {200,
          {{"frame_id", id},
           {"story", latest.story},
           {"report", latest.report ? *latest.report : Json(nullptr)},
           {"frame_json", to_canonical_json(frame)},
           {"diagram", build_diagram(frame, session.builder.attachments())}}};
}

}  // namespace storyframe
