#include "storyframe/validation.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace storyframe {

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

void ValidationReport::add(std::string_view code, std::string path, std::string message,
                           std::vector<std::string> subjects) {
  violations.push_back({std::string(code), std::move(path), std::move(message), std::move(subjects)});
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& v : violations) {
    out << v.code;
    if (!v.path.empty()) out << " at " << v.path;
    out << ": " << v.message << '\n';
  }
  return out.str();
}

Json to_json(const ValidationReport& report) {
  Json violations = Json::array();
  for (const auto& v : report.violations) {
    violations.push_back(
        {{"code", v.code}, {"path", v.path}, {"message", v.message}, {"subjects", v.subjects}});
  }
  return {{"ok", report.ok()}, {"violations", std::move(violations)}};
}

namespace {

std::string describe(const ValidationReport& report) {
  if (report.violations.empty()) return "frame validation failed";
  const auto& first = report.violations.front();
  std::string msg = "frame validation failed: " + first.code;
  if (!first.path.empty()) msg += " at " + first.path;
  msg += ": " + first.message;
  if (report.violations.size() > 1) {
    msg += " (+" + std::to_string(report.violations.size() - 1) + " more)";
  }
  return msg;
}

std::string child(const std::string& path, std::string_view key) {
  return path + "/" + std::string(key);
}
std::string child(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

enum class Text { any, non_empty };

class DocumentValidator {
 public:
  DocumentValidator(const Json& doc, UnitSet expected) : doc_(doc), expected_(expected) {}

  ValidationReport run() {
    if (!doc_.is_object()) {
      report_.add(codes::kSchemaViolation, "", "frame document must be a JSON object");
      return std::move(report_);
    }
    for (const auto& [key, value] : doc_.items()) {
      auto unit = parse_unit(key);
      if (!unit || !expected_.contains(*unit)) {
        report_.add(codes::kSchemaViolation, "/" + key, "unexpected top-level key");
      }
    }
    for (Unit u : kUnits) {
      if (expected_.contains(u) && !doc_.contains(std::string(to_string(u)))) {
        report_.add(codes::kSchemaViolation, "/" + std::string(to_string(u)),
                    "missing required unit");
      }
    }
    if (has_unit(Unit::entities)) check_entities(doc_.at("entities"));
    if (has_unit(Unit::events)) check_events(doc_.at("events"));
    if (has_unit(Unit::relationships)) check_relationships(doc_.at("relationships"));
    if (has_unit(Unit::outline)) check_outline(doc_.at("outline"));
    return std::move(report_);
  }

 private:
  struct EventLinks {
    std::string id;
    std::string path;
    std::optional<std::string> earlier;
    std::optional<std::string> later;
  };

  bool has_unit(Unit u) const {
    return expected_.contains(u) && doc_.contains(std::string(to_string(u)));
  }

  // Checks required/unknown fields. Returns false if `obj` is not an object.
  bool check_fields(const Json& obj, const std::string& path,
                    std::initializer_list<std::string_view> fields) {
    if (!obj.is_object()) {
      report_.add(codes::kSchemaViolation, path, "expected an object");
      return false;
    }
    for (auto field : fields) {
      if (!obj.contains(std::string(field))) {
        report_.add(codes::kSchemaViolation, child(path, field), "missing required field");
      }
    }
    for (const auto& [key, value] : obj.items()) {
      if (std::find(fields.begin(), fields.end(), key) == fields.end()) {
        report_.add(codes::kSchemaViolation, child(path, key), "unknown field");
      }
    }
    return true;
  }

  std::optional<std::string> text(const Json& obj, const std::string& path, std::string_view field,
                                  Text rule = Text::any) {
    auto it = obj.find(std::string(field));
    if (it == obj.end()) return std::nullopt;
    if (!it->is_string()) {
      report_.add(codes::kSchemaViolation, child(path, field), "expected a string");
      return std::nullopt;
    }
    auto value = it->get<std::string>();
    if (rule == Text::non_empty && value.empty()) {
      report_.add(codes::kSchemaViolation, child(path, field), "must not be empty");
    }
    return value;
  }

  // Field holding an id string or null. Missing or mistyped -> nullopt.
  std::optional<std::optional<std::string>> nullable_id(const Json& obj, const std::string& path,
                                                        std::string_view field) {
    auto it = obj.find(std::string(field));
    if (it == obj.end()) return std::nullopt;
    if (it->is_null()) return std::optional<std::string>{};
    if (!it->is_string()) {
      report_.add(codes::kSchemaViolation, child(path, field), "expected a string id or null");
      return std::nullopt;
    }
    return std::optional<std::string>{it->get<std::string>()};
  }

  std::optional<std::vector<std::string>> text_list(const Json& obj, const std::string& path,
                                                    std::string_view field) {
    auto it = obj.find(std::string(field));
    if (it == obj.end()) return std::nullopt;
    const auto list_path = child(path, field);
    if (!it->is_array()) {
      report_.add(codes::kSchemaViolation, list_path, "expected an array of strings");
      return std::nullopt;
    }
    std::vector<std::string> out;
    bool ok = true;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto& item = (*it)[i];
      if (!item.is_string()) {
        report_.add(codes::kSchemaViolation, child(list_path, i), "expected a string");
        ok = false;
      } else {
        out.push_back(item.get<std::string>());
      }
    }
    if (!ok) return std::nullopt;
    return out;
  }

  template <typename Enum>
  void enum_field(const Json& obj, const std::string& path, std::string_view field,
                  std::optional<Enum> (*parse)(std::string_view), std::optional<Enum>* out = nullptr) {
    auto value = text(obj, path, field);
    if (!value) return;
    auto parsed = parse(*value);
    if (!parsed) {
      report_.add(codes::kSchemaViolation, child(path, field), "unknown value '" + *value + "'");
    }
    if (out) *out = parsed;
  }

  void id_field(const Json& obj, const std::string& path, std::string_view field,
                std::string_view prefix, std::set<std::string>& seen) {
    auto id = text(obj, path, field);
    if (!id) return;
    if (!parse_id(prefix, *id)) {
      report_.add(codes::kInvalidId, child(path, field),
                  "id must match " + std::string(prefix) + "_<positive integer>", {*id});
    }
    if (!seen.insert(*id).second) {
      report_.add(codes::kDuplicateId, child(path, field), "duplicate id", {*id});
    }
  }

  bool array_unit(const Json& value, const std::string& path) {
    if (value.is_array()) return true;
    report_.add(codes::kSchemaViolation, path, "expected an array");
    return false;
  }

  void check_entities(const Json& entities) {
    if (!array_unit(entities, "/entities")) return;
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const auto path = child(std::string("/entities"), i);
      const auto& e = entities[i];
      if (!check_fields(e, path,
                        {"entity_id", "entity_name", "entity_identity", "entity_motivation",
                         "personality_traits"})) {
        continue;
      }
      id_field(e, path, "entity_id", kEntityPrefix, entity_ids_);
      text(e, path, "entity_name", Text::non_empty);
      text(e, path, "entity_identity", Text::non_empty);
      text(e, path, "entity_motivation");
      if (auto traits = text_list(e, path, "personality_traits")) {
        if (traits->empty()) {
          report_.add(codes::kSchemaViolation, child(path, "personality_traits"),
                      "at least one personality trait is required");
        }
        for (std::size_t t = 0; t < traits->size(); ++t) {
          if ((*traits)[t].empty()) {
            report_.add(codes::kSchemaViolation,
                        child(child(path, "personality_traits"), t), "must not be empty");
          }
        }
      }
    }
  }

  void check_events(const Json& events) {
    if (!array_unit(events, "/events")) return;
    bool links_complete = true;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto path = child(std::string("/events"), i);
      const auto& e = events[i];
      if (!check_fields(e, path,
                        {"event_id", "event_time", "event_location", "event_details",
                         "event_importance", "earlier_event", "later_event"})) {
        links_complete = false;
        continue;
      }
      id_field(e, path, "event_id", kEventPrefix, event_ids_);
      text(e, path, "event_time");
      text(e, path, "event_location");
      text(e, path, "event_details", Text::non_empty);
      enum_field<Level>(e, path, "event_importance", parse_level);
      auto earlier = nullable_id(e, path, "earlier_event");
      auto later = nullable_id(e, path, "later_event");
      auto id = e.contains("event_id") && e["event_id"].is_string()
                    ? std::optional<std::string>(e["event_id"].get<std::string>())
                    : std::nullopt;
      if (!id || !earlier || !later) {
        links_complete = false;
        continue;
      }
      links_.push_back({*id, path, *earlier, *later});
    }
    // Duplicate ids make the link structure ambiguous.
    if (event_ids_.size() != links_.size()) links_complete = false;
    for (const auto& link : links_) {
      for (auto [field, target] : {std::pair{"earlier_event", &link.earlier},
                                   std::pair{"later_event", &link.later}}) {
        if (!*target) continue;
        if (!event_ids_.count(**target)) {
          report_.add(codes::kDanglingReference, child(link.path, field),
                      "unknown event '" + **target + "'", {**target});
          links_complete = false;
        } else if (**target == link.id) {
          report_.add(codes::kChainCycle, child(link.path, field), "event links to itself",
                      {link.id});
          links_complete = false;
        }
      }
    }
    if (links_complete) check_chain();
  }

  void check_chain() {
    std::map<std::string, const EventLinks*> by_id;
    for (const auto& link : links_) by_id[link.id] = &link;

    bool shape_ok = true;
    std::map<std::string, std::vector<std::string>> predecessors;  // via later_event
    std::map<std::string, std::vector<std::string>> successors;    // via earlier_event
    for (const auto& link : links_) {
      if (link.later) predecessors[*link.later].push_back(link.id);
      if (link.earlier) successors[*link.earlier].push_back(link.id);
    }
    for (const auto& [target, sources] : predecessors) {
      if (sources.size() > 1) {
        report_.add(codes::kChainBranch, by_id[target]->path,
                    "several events name '" + target + "' as their later event", sources);
        shape_ok = false;
      }
    }
    for (const auto& [target, sources] : successors) {
      if (sources.size() > 1) {
        report_.add(codes::kChainBranch, by_id[target]->path,
                    "several events name '" + target + "' as their earlier event", sources);
        shape_ok = false;
      }
    }
    for (const auto& link : links_) {
      if (link.later && by_id[*link.later]->earlier != link.id) {
        report_.add(codes::kChainInconsistent, child(link.path, "later_event"),
                    "'" + *link.later + "' does not name '" + link.id + "' as its earlier event",
                    {link.id, *link.later});
        shape_ok = false;
      }
      if (link.earlier && by_id[*link.earlier]->later != link.id) {
        report_.add(codes::kChainInconsistent, child(link.path, "earlier_event"),
                    "'" + *link.earlier + "' does not name '" + link.id + "' as its later event",
                    {*link.earlier, link.id});
        shape_ok = false;
      }
    }
    if (!shape_ok || links_.empty()) {
      if (shape_ok) chain_order_ = std::vector<std::string>{};
      return;
    }

    std::vector<std::string> heads;
    for (const auto& link : links_) {
      if (!link.earlier) heads.push_back(link.id);
    }
    std::set<std::string> visited;
    std::vector<std::string> order;
    for (const auto& head : heads) {
      std::optional<std::string> cursor = head;
      while (cursor && !visited.count(*cursor)) {
        visited.insert(*cursor);
        order.push_back(*cursor);
        cursor = by_id[*cursor]->later;
      }
    }
    if (visited.size() != links_.size()) {
      std::vector<std::string> cyclic;
      for (const auto& link : links_) {
        if (!visited.count(link.id)) cyclic.push_back(link.id);
      }
      report_.add(codes::kChainCycle, "/events", "event order contains a cycle", cyclic);
      return;
    }
    if (heads.size() > 1) {
      report_.add(codes::kChainDisconnected, "/events",
                  "events form " + std::to_string(heads.size()) +
                      " separate chains; a single linear sequence is required",
                  heads);
      return;
    }
    chain_order_ = std::move(order);
  }

  void check_relationships(const Json& relationships) {
    if (!array_unit(relationships, "/relationships")) return;
    const bool with_entities = has_unit(Unit::entities);
    const bool with_events = has_unit(Unit::events);
    std::set<std::string> rel_ids;
    for (std::size_t i = 0; i < relationships.size(); ++i) {
      const auto path = child(std::string("/relationships"), i);
      const auto& r = relationships[i];
      if (!check_fields(r, path,
                        {"relationship_id", "included_entities", "source_entities",
                         "target_entities", "emotional_type", "action_type", "action_direction",
                         "relationship_strength", "relationship_evolution", "event_id"})) {
        continue;
      }
      id_field(r, path, "relationship_id", kRelationshipPrefix, rel_ids);
      text(r, path, "emotional_type");
      text(r, path, "action_type");
      text(r, path, "relationship_evolution");
      enum_field<Level>(r, path, "relationship_strength", parse_level);
      std::optional<Direction> direction;
      enum_field<Direction>(r, path, "action_direction", parse_direction, &direction);

      auto included = text_list(r, path, "included_entities");
      auto sources = text_list(r, path, "source_entities");
      auto targets = text_list(r, path, "target_entities");

      if (auto event = nullable_id(r, path, "event_id"); event && *event && with_events) {
        if (!event_ids_.count(**event)) {
          report_.add(codes::kDanglingReference, child(path, "event_id"),
                      "unknown event '" + **event + "'", {**event});
        }
      }

      if (!with_entities) {
        for (auto [field, list] : {std::pair{"included_entities", &included},
                                   std::pair{"source_entities", &sources},
                                   std::pair{"target_entities", &targets}}) {
          if (*list && !(*list)->empty()) {
            report_.add(codes::kSchemaViolation, child(path, field),
                        "entity references must be empty when the entities unit is absent");
          }
        }
        continue;
      }
      if (!included || !sources || !targets) continue;

      bool members_ok = true;
      for (auto [field, list] : {std::pair{"included_entities", &*included},
                                 std::pair{"source_entities", &*sources},
                                 std::pair{"target_entities", &*targets}}) {
        if (list->empty()) {
          report_.add(codes::kSchemaViolation, child(path, field), "must not be empty");
          members_ok = false;
        }
        std::set<std::string> seen;
        for (std::size_t j = 0; j < list->size(); ++j) {
          const auto& id = (*list)[j];
          if (!entity_ids_.count(id)) {
            report_.add(codes::kDanglingReference, child(child(path, field), j),
                        "unknown entity '" + id + "'", {id});
          }
          if (!seen.insert(id).second) {
            report_.add(codes::kRelationshipMembers, child(child(path, field), j),
                        "entity listed twice", {id});
            members_ok = false;
          }
        }
      }
      std::set<std::string> union_ids(sources->begin(), sources->end());
      union_ids.insert(targets->begin(), targets->end());
      std::set<std::string> included_ids(included->begin(), included->end());
      if (union_ids != included_ids) {
        report_.add(codes::kRelationshipMembers, child(path, "included_entities"),
                    "included_entities must equal the union of source and target entities");
        members_ok = false;
      }
      if (!members_ok || !direction) continue;

      const bool single = included->size() == 1 && *sources == *targets;
      if (*direction == Direction::self && !single) {
        report_.add(codes::kDirectionInvalid, child(path, "action_direction"),
                    "a self relationship involves exactly one entity as both source and target");
      } else if (*direction != Direction::self && single) {
        report_.add(codes::kDirectionInvalid, child(path, "action_direction"),
                    "a relationship of one entity with itself must use direction 'self'");
      }
    }
  }

  void check_outline(const Json& outline) {
    const std::string path = "/outline";
    if (!check_fields(outline, path, {"title", "story_description", "story_structure"})) return;
    text(outline, path, "title", Text::non_empty);
    text(outline, path, "story_description");
    if (!outline.contains("story_structure")) return;

    const auto structure_path = child(path, "story_structure");
    const auto& structure = outline.at("story_structure");
    if (!check_fields(structure, structure_path, {"beginning", "middle", "climax", "ending"})) {
      return;
    }
    const bool with_events = has_unit(Unit::events);
    std::map<std::string, std::size_t> stage_of;
    bool outline_ok = true;
    for (Stage s : kStages) {
      auto ids = text_list(structure, structure_path, to_string(s));
      if (!ids) {
        outline_ok = false;
        continue;
      }
      const auto stage_path = child(structure_path, to_string(s));
      if (!with_events) {
        if (!ids->empty()) {
          report_.add(codes::kSchemaViolation, stage_path,
                      "stages must be empty when the events unit is absent");
        }
        continue;
      }
      for (std::size_t j = 0; j < ids->size(); ++j) {
        const auto& id = (*ids)[j];
        if (!event_ids_.count(id)) {
          report_.add(codes::kDanglingReference, child(stage_path, j),
                      "unknown event '" + id + "'", {id});
          outline_ok = false;
        } else if (!stage_of.emplace(id, index_of(s)).second) {
          report_.add(codes::kOutlineDuplicate, child(stage_path, j),
                      "event '" + id + "' is assigned to more than one stage", {id});
          outline_ok = false;
        }
      }
    }
    if (!with_events) return;
    for (const auto& id : event_ids_) {
      if (!stage_of.count(id)) {
        report_.add(codes::kOutlineIncomplete, structure_path,
                    "event '" + id + "' is not assigned to any stage", {id});
        outline_ok = false;
      }
    }
    if (!outline_ok || !chain_order_) return;
    for (std::size_t k = 1; k < chain_order_->size(); ++k) {
      const auto& prev = (*chain_order_)[k - 1];
      const auto& next = (*chain_order_)[k];
      if (stage_of.at(prev) > stage_of.at(next)) {
        report_.add(codes::kStageOrder, structure_path,
                    "'" + prev + "' precedes '" + next + "' in the event chain but is placed in a later stage",
                    {prev, next});
      }
    }
  }

  const Json& doc_;
  UnitSet expected_;
  ValidationReport report_;
  std::set<std::string> entity_ids_;
  std::set<std::string> event_ids_;
  std::vector<EventLinks> links_;
  std::optional<std::vector<std::string>> chain_order_;
};

}  // namespace

FrameParseError::FrameParseError(ValidationReport report)
    : std::runtime_error(describe(report)), report_(std::move(report)) {}

ValidationReport validate_document(const Json& doc, UnitSet expected) {
  return DocumentValidator(doc, expected).run();
}

ValidationReport validate_bytes(std::string_view bytes, UnitSet expected) {
  Json doc = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (doc.is_discarded()) {
    ValidationReport report;
    report.add(codes::kMalformedJson, "", "document is not well-formed JSON");
    return report;
  }
  return validate_document(doc, expected);
}

ValidationReport validate_structure(const StoryFrame& frame) {
  return validate_document(to_json_document(frame), UnitSet::all());
}

namespace {

Json id_pattern(std::string_view prefix) {
  return {{"type", "string"}, {"pattern", "^" + std::string(prefix) + "_[1-9][0-9]*$"}};
}

Json string_enum(std::initializer_list<const char*> values) {
  Json list = Json::array();
  for (auto v : values) list.push_back(v);
  return {{"type", "string"}, {"enum", std::move(list)}};
}

Json nullable(Json schema) { return {{"oneOf", Json::array({std::move(schema), {{"type", "null"}}})}}; }

Json object_schema(Json properties) {
  Json required = Json::array();
  for (const auto& [key, value] : properties.items()) required.push_back(key);
  return {{"type", "object"},
          {"additionalProperties", false},
          {"required", std::move(required)},
          {"properties", std::move(properties)}};
}

Json id_list(std::string_view prefix, bool present) {
  Json schema = {{"type", "array"}, {"items", id_pattern(prefix)}};
  if (present) {
    schema["minItems"] = 1;
    schema["uniqueItems"] = true;
  } else {
    schema["maxItems"] = 0;
  }
  return schema;
}

}  // namespace

Json frame_json_schema(UnitSet units) {
  const Json text = {{"type", "string"}};
  const Json non_empty = {{"type", "string"}, {"minLength", 1}};
  const Json level = string_enum({"low", "medium", "high"});

  Json entity = object_schema({{"entity_id", id_pattern(kEntityPrefix)},
                               {"entity_name", non_empty},
                               {"entity_identity", non_empty},
                               {"entity_motivation", text},
                               {"personality_traits",
                                {{"type", "array"}, {"minItems", 1}, {"items", non_empty}}}});
  Json event = object_schema({{"event_id", id_pattern(kEventPrefix)},
                              {"event_time", text},
                              {"event_location", text},
                              {"event_details", non_empty},
                              {"event_importance", level},
                              {"earlier_event", nullable(id_pattern(kEventPrefix))},
                              {"later_event", nullable(id_pattern(kEventPrefix))}});
  const bool with_entities = units.contains(Unit::entities);
  Json relationship = object_schema(
      {{"relationship_id", id_pattern(kRelationshipPrefix)},
       {"included_entities", id_list(kEntityPrefix, with_entities)},
       {"source_entities", id_list(kEntityPrefix, with_entities)},
       {"target_entities", id_list(kEntityPrefix, with_entities)},
       {"emotional_type", text},
       {"action_type", text},
       {"action_direction", string_enum({"self", "unidirectional", "bidirectional"})},
       {"relationship_strength", level},
       {"relationship_evolution", text},
       {"event_id", nullable(id_pattern(kEventPrefix))}});
  Json stage_list = {{"type", "array"}, {"items", id_pattern(kEventPrefix)}};
  if (!units.contains(Unit::events)) stage_list["maxItems"] = 0;
  Json structure = Json::object();
  for (Stage s : kStages) structure[std::string(to_string(s))] = stage_list;
  Json outline = object_schema({{"title", non_empty},
                                {"story_description", text},
                                {"story_structure", object_schema(std::move(structure))}});

  Json properties = Json::object();
  Json defs = Json::object();
  if (units.contains(Unit::entities)) {
    properties["entities"] = {{"type", "array"}, {"items", {{"$ref", "#/$defs/entity"}}}};
    defs["entity"] = std::move(entity);
  }
  if (units.contains(Unit::events)) {
    properties["events"] = {{"type", "array"}, {"items", {{"$ref", "#/$defs/event"}}}};
    defs["event"] = std::move(event);
  }
  if (units.contains(Unit::relationships)) {
    properties["relationships"] = {{"type", "array"},
                                   {"items", {{"$ref", "#/$defs/relationship"}}}};
    defs["relationship"] = std::move(relationship);
  }
  if (units.contains(Unit::outline)) {
    properties["outline"] = {{"$ref", "#/$defs/outline"}};
    defs["outline"] = std::move(outline);
  }

  Json schema = object_schema(std::move(properties));
  Json out = Json::object();
  out["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  out["$id"] = "story_frame." + units.variant_name() + ".schema.json";
  out["title"] = "Story frame (" + units.variant_name() + ")";
  out["description"] =
      "Cross-reference, id uniqueness, linear event chain and outline coverage rules are "
      "enforced by the validator in addition to this schema.";
  for (auto& [key, value] : schema.items()) out[key] = value;
  out["$defs"] = std::move(defs);
  return out;
}

}  // namespace storyframe
