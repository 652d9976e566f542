#include "storyframe/story_model.hpp"

#include <algorithm>
#include <charconv>

#include "storyframe/validation.hpp"

namespace storyframe {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table,
                        std::string_view text) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<std::string_view, Level>, 3> kLevelNames{
    {{"low", Level::low}, {"medium", Level::medium}, {"high", Level::high}}};
constexpr std::array<std::pair<std::string_view, Direction>, 3> kDirectionNames{
    {{"self", Direction::self},
     {"unidirectional", Direction::unidirectional},
     {"bidirectional", Direction::bidirectional}}};
constexpr std::array<std::pair<std::string_view, Stage>, 4> kStageNames{
    {{"beginning", Stage::beginning},
     {"middle", Stage::middle},
     {"climax", Stage::climax},
     {"ending", Stage::ending}}};
constexpr std::array<std::pair<std::string_view, Unit>, 4> kUnitNames{
    {{"entities", Unit::entities},
     {"events", Unit::events},
     {"relationships", Unit::relationships},
     {"outline", Unit::outline}}};

Json optional_id(const std::optional<std::string>& id) {
  return id ? Json(*id) : Json(nullptr);
}

}  // namespace

std::string_view to_string(Level level) { return kLevelNames[static_cast<int>(level)].first; }
std::string_view to_string(Direction d) { return kDirectionNames[static_cast<int>(d)].first; }
std::string_view to_string(Stage stage) { return kStageNames[static_cast<int>(stage)].first; }
std::string_view to_string(Unit unit) { return kUnitNames[static_cast<int>(unit)].first; }

std::optional<Level> parse_level(std::string_view text) { return lookup(kLevelNames, text); }
std::optional<Direction> parse_direction(std::string_view text) {
  return lookup(kDirectionNames, text);
}
std::optional<Stage> parse_stage(std::string_view text) { return lookup(kStageNames, text); }
std::optional<Unit> parse_unit(std::string_view text) { return lookup(kUnitNames, text); }

std::string format_id(std::string_view prefix, std::uint32_t number) {
  std::string out(prefix);
  out += '_';
  out += std::to_string(number);
  return out;
}

std::optional<std::uint32_t> parse_id(std::string_view prefix, std::string_view id) {
  if (id.size() <= prefix.size() + 1 || id.substr(0, prefix.size()) != prefix ||
      id[prefix.size()] != '_') {
    return std::nullopt;
  }
  const auto digits = id.substr(prefix.size() + 1);
  // No sign, no leading zero.
  if (digits.front() < '1' || digits.front() > '9') return std::nullopt;
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

const Entity* StoryFrame::find_entity(std::string_view id) const {
  auto it = std::find_if(entities.begin(), entities.end(), [&](const auto& e) { return e.id == id; });
  return it == entities.end() ? nullptr : &*it;
}

const Event* StoryFrame::find_event(std::string_view id) const {
  auto it = std::find_if(events.begin(), events.end(), [&](const auto& e) { return e.id == id; });
  return it == events.end() ? nullptr : &*it;
}

const Relationship* StoryFrame::find_relationship(std::string_view id) const {
  auto it = std::find_if(relationships.begin(), relationships.end(),
                         [&](const auto& r) { return r.id == id; });
  return it == relationships.end() ? nullptr : &*it;
}

std::string UnitSet::variant_name() const {
  if (*this == all()) return "full";
  for (Unit u : kUnits) {
    if (*this == without(u)) return "without_" + std::string(to_string(u));
  }
  std::string name = "partial";
  for (Unit u : kUnits) {
    if (contains(u)) {
      name += '_';
      name += to_string(u);
    }
  }
  return name;
}

std::optional<UnitSet> UnitSet::from_variant_name(std::string_view name) {
  if (name == "full") return all();
  constexpr std::string_view prefix = "without_";
  if (name.substr(0, prefix.size()) == prefix) {
    if (auto u = parse_unit(name.substr(prefix.size()))) return without(*u);
  }
  return std::nullopt;
}

UnitSet units_present(const Json& doc) {
  UnitSet set;
  if (!doc.is_object()) return set;
  for (Unit u : kUnits) {
    if (doc.contains(std::string(to_string(u)))) set = set.insert(u);
  }
  return set;
}

Json to_json_document(const StoryFrame& frame) {
  Json entities = Json::array();
  for (const auto& e : frame.entities) {
    entities.push_back({{"entity_id", e.id},
                        {"entity_name", e.name},
                        {"entity_identity", e.identity},
                        {"entity_motivation", e.motivation},
                        {"personality_traits", e.personality_traits}});
  }
  Json events = Json::array();
  for (const auto& e : frame.events) {
    events.push_back({{"event_id", e.id},
                      {"event_time", e.time},
                      {"event_location", e.location},
                      {"event_details", e.details},
                      {"event_importance", to_string(e.importance)},
                      {"earlier_event", optional_id(e.earlier_event)},
                      {"later_event", optional_id(e.later_event)}});
  }
  Json relationships = Json::array();
  for (const auto& r : frame.relationships) {
    relationships.push_back({{"relationship_id", r.id},
                             {"included_entities", r.included_entities},
                             {"source_entities", r.source_entities},
                             {"target_entities", r.target_entities},
                             {"emotional_type", r.emotional_type},
                             {"action_type", r.action_type},
                             {"action_direction", to_string(r.direction)},
                             {"relationship_strength", to_string(r.strength)},
                             {"relationship_evolution", r.evolution},
                             {"event_id", optional_id(r.event_id)}});
  }
  Json structure = Json::object();
  for (Stage s : kStages) structure[std::string(to_string(s))] = frame.outline.stage(s);

  Json doc = Json::object();
  doc["entities"] = std::move(entities);
  doc["events"] = std::move(events);
  doc["relationships"] = std::move(relationships);
  doc["outline"] = {{"title", frame.outline.title},
                    {"story_description", frame.outline.description},
                    {"story_structure", std::move(structure)}};
  return doc;
}

std::string to_canonical_json(const Json& doc) { return doc.dump(2); }

std::string to_canonical_json(const StoryFrame& frame) {
  return to_canonical_json(to_json_document(frame));
}

namespace {

std::optional<std::string> id_or_null(const Json& value) {
  if (value.is_null()) return std::nullopt;
  return value.get<std::string>();
}

}  // namespace

StoryFrame decode_frame_unvalidated(const Json& doc) {
  StoryFrame frame;
  for (const auto& e : doc.at("entities")) {
    frame.entities.push_back({e.at("entity_id").get<std::string>(),
                              e.at("entity_name").get<std::string>(),
                              e.at("entity_identity").get<std::string>(),
                              e.at("entity_motivation").get<std::string>(),
                              e.at("personality_traits").get<std::vector<std::string>>()});
  }
  for (const auto& e : doc.at("events")) {
    frame.events.push_back({e.at("event_id").get<std::string>(),
                            e.at("event_time").get<std::string>(),
                            e.at("event_location").get<std::string>(),
                            e.at("event_details").get<std::string>(),
                            *parse_level(e.at("event_importance").get<std::string>()),
                            id_or_null(e.at("earlier_event")),
                            id_or_null(e.at("later_event"))});
  }
  for (const auto& r : doc.at("relationships")) {
    Relationship rel;
    rel.id = r.at("relationship_id").get<std::string>();
    rel.included_entities = r.at("included_entities").get<std::vector<std::string>>();
    rel.source_entities = r.at("source_entities").get<std::vector<std::string>>();
    rel.target_entities = r.at("target_entities").get<std::vector<std::string>>();
    rel.emotional_type = r.at("emotional_type").get<std::string>();
    rel.action_type = r.at("action_type").get<std::string>();
    rel.direction = *parse_direction(r.at("action_direction").get<std::string>());
    rel.strength = *parse_level(r.at("relationship_strength").get<std::string>());
    rel.evolution = r.at("relationship_evolution").get<std::string>();
    rel.event_id = id_or_null(r.at("event_id"));
    frame.relationships.push_back(std::move(rel));
  }
  const auto& outline = doc.at("outline");
  frame.outline.title = outline.at("title").get<std::string>();
  frame.outline.description = outline.at("story_description").get<std::string>();
  for (Stage s : kStages) {
    frame.outline.stage(s) =
        outline.at("story_structure").at(std::string(to_string(s))).get<std::vector<std::string>>();
  }
  return frame;
}

StoryFrame from_json_document(const Json& doc) {
  auto report = validate_document(doc, UnitSet::all());
  if (!report.ok()) throw FrameParseError(std::move(report));
  return decode_frame_unvalidated(doc);
}

StoryFrame from_canonical_json(std::string_view bytes) {
  Json doc = Json::parse(bytes.begin(), bytes.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    ValidationReport report;
    report.add(codes::kMalformedJson, "", "document is not well-formed JSON");
    throw FrameParseError(std::move(report));
  }
  return from_json_document(doc);
}

Json strip_unit(const Json& doc, Unit unit) {
  Json out = doc;
  out.erase(std::string(to_string(unit)));
  switch (unit) {
    case Unit::events:
      if (out.contains("outline") && out["outline"].contains("story_structure")) {
        for (auto& [stage, ids] : out["outline"]["story_structure"].items()) ids = Json::array();
      }
      break;
    case Unit::entities:
      if (out.contains("relationships")) {
        for (auto& rel : out["relationships"]) {
          for (const char* key : {"included_entities", "source_entities", "target_entities"}) {
            if (rel.contains(key)) rel[key] = Json::array();
          }
        }
      }
      break;
    case Unit::relationships:
    case Unit::outline:
      break;
  }
  return out;
}

Json strip_unit(const StoryFrame& frame, Unit unit) {
  return strip_unit(to_json_document(frame), unit);
}

}  // namespace storyframe
