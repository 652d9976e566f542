#include "storyframe/frame_graph.hpp"

#include <algorithm>
#include <set>

namespace storyframe {

namespace {

template <typename T>
auto find_by_id(std::vector<T>& items, const std::string& id) {
  return std::find_if(items.begin(), items.end(), [&](const T& item) { return item.id == id; });
}

template <typename T>
bool contains_id(const std::vector<T>& items, const std::string& id) {
  return std::any_of(items.begin(), items.end(), [&](const T& item) { return item.id == id; });
}

void erase_value(std::vector<std::string>& list, const std::string& value) {
  list.erase(std::remove(list.begin(), list.end(), value), list.end());
}

bool contains(const std::vector<std::string>& list, const std::string& value) {
  return std::find(list.begin(), list.end(), value) != list.end();
}

std::vector<std::string> dedup(std::vector<std::string> list) {
  std::vector<std::string> out;
  for (auto& item : list) {
    if (!contains(out, item)) out.push_back(std::move(item));
  }
  return out;
}

// Sources first, then targets not already listed.
std::vector<std::string> union_in_order(const std::vector<std::string>& sources,
                                        const std::vector<std::string>& targets) {
  std::vector<std::string> out = sources;
  for (const auto& t : targets) {
    if (!contains(out, t)) out.push_back(t);
  }
  return out;
}

Direction derive_direction(const std::vector<std::string>& sources,
                           const std::vector<std::string>& targets) {
  return sources.size() == 1 && sources == targets ? Direction::self : Direction::unidirectional;
}

std::uint32_t next_number(std::string_view prefix, const std::vector<std::string>& ids) {
  std::uint32_t max = 0;
  for (const auto& id : ids) {
    if (auto n = parse_id(prefix, id)) max = std::max(max, *n);
  }
  return max + 1;
}

void require_text(const std::string& value, std::string_view field) {
  if (value.empty()) {
    throw BuilderError(BuilderErrorCode::invalid_attribute,
                       std::string(field) + " must not be empty");
  }
}

void require_traits(const std::vector<std::string>& traits) {
  if (traits.empty()) {
    throw BuilderError(BuilderErrorCode::invalid_attribute,
                       "at least one personality trait is required");
  }
  for (const auto& t : traits) require_text(t, "personality trait");
}

}  // namespace

std::string_view to_string(BuilderErrorCode code) {
  switch (code) {
    case BuilderErrorCode::invalid_attribute: return "InvalidAttribute";
    case BuilderErrorCode::unknown_id: return "UnknownId";
    case BuilderErrorCode::not_attached: return "NotAttached";
    case BuilderErrorCode::self_relationship: return "SelfRelationship";
    case BuilderErrorCode::cycle_detected: return "CycleDetected";
    case BuilderErrorCode::branch_detected: return "BranchDetected";
    case BuilderErrorCode::invalid_op: return "InvalidOp";
  }
  return "Unknown";
}

BuilderError::BuilderError(BuilderErrorCode code, std::string message,
                           std::vector<std::string> subjects)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subjects_(std::move(subjects)) {}

ValidationFailed::ValidationFailed(ValidationReport report)
    : std::runtime_error("ValidationFailed: " + std::to_string(report.violations.size()) +
                         " violation(s)\n" + report.summary()),
      report_(std::move(report)) {}

FrameBuilder FrameBuilder::from_frame(const StoryFrame& frame) {
  FrameBuilder b;
  b.entities_ = frame.entities;
  b.events_ = frame.events;
  b.relationships_ = frame.relationships;
  b.outline_ = frame.outline;
  std::vector<std::string> ids;
  for (const auto& e : frame.entities) ids.push_back(e.id);
  b.next_entity_ = next_number(kEntityPrefix, ids);
  ids.clear();
  for (const auto& e : frame.events) {
    ids.push_back(e.id);
    b.attachments_[e.id];
  }
  b.next_event_ = next_number(kEventPrefix, ids);
  ids.clear();
  for (const auto& r : frame.relationships) {
    ids.push_back(r.id);
    if (r.event_id && b.attachments_.count(*r.event_id)) {
      auto& participants = b.attachments_[*r.event_id];
      for (const auto& entity : r.included_entities) {
        if (!contains(participants, entity)) participants.push_back(entity);
      }
    }
  }
  b.next_relationship_ = next_number(kRelationshipPrefix, ids);
  return b;
}

Entity& FrameBuilder::entity_ref(const std::string& id) {
  auto it = find_by_id(entities_, id);
  if (it == entities_.end()) {
    throw BuilderError(BuilderErrorCode::unknown_id, "no entity '" + id + "'", {id});
  }
  return *it;
}

Event& FrameBuilder::event_ref(const std::string& id) {
  auto it = find_by_id(events_, id);
  if (it == events_.end()) {
    throw BuilderError(BuilderErrorCode::unknown_id, "no event '" + id + "'", {id});
  }
  return *it;
}

Relationship& FrameBuilder::relationship_ref(const std::string& id) {
  auto it = find_by_id(relationships_, id);
  if (it == relationships_.end()) {
    throw BuilderError(BuilderErrorCode::unknown_id, "no relationship '" + id + "'", {id});
  }
  return *it;
}

void FrameBuilder::require_entity(const std::string& id) const {
  if (!contains_id(entities_, id)) {
    throw BuilderError(BuilderErrorCode::unknown_id, "no entity '" + id + "'", {id});
  }
}

std::string FrameBuilder::create_entity(std::string name, std::string identity,
                                        std::string motivation,
                                        std::vector<std::string> personality_traits) {
  require_text(name, "entity_name");
  require_text(identity, "entity_identity");
  require_traits(personality_traits);
  auto id = format_id(kEntityPrefix, next_entity_++);
  entities_.push_back({id, std::move(name), std::move(identity), std::move(motivation),
                       std::move(personality_traits)});
  return id;
}

std::string FrameBuilder::create_event(std::string time, std::string location,
                                       std::string details, Level importance) {
  require_text(details, "event_details");
  auto id = format_id(kEventPrefix, next_event_++);
  events_.push_back(
      {id, std::move(time), std::move(location), std::move(details), importance, {}, {}});
  attachments_[id];
  return id;
}

void FrameBuilder::attach_entity(const std::string& event_id, const std::string& entity_id) {
  event_ref(event_id);
  require_entity(entity_id);
  auto& participants = attachments_[event_id];
  if (!contains(participants, entity_id)) participants.push_back(entity_id);
}

void FrameBuilder::detach_entity(const std::string& event_id, const std::string& entity_id) {
  event_ref(event_id);
  require_entity(entity_id);
  for (const auto& r : relationships_) {
    if (r.event_id == event_id && contains(r.included_entities, entity_id)) {
      throw BuilderError(BuilderErrorCode::invalid_attribute,
                         "'" + entity_id + "' still takes part in " + r.id + " in this event",
                         {entity_id, r.id});
    }
  }
  erase_value(attachments_[event_id], entity_id);
}

const std::vector<std::string>& FrameBuilder::participants(const std::string& event_id) const {
  static const std::vector<std::string> empty;
  auto it = attachments_.find(event_id);
  return it == attachments_.end() ? empty : it->second;
}

std::string FrameBuilder::connect_relationship(const std::string& event_id,
                                               std::vector<std::string> sources,
                                               std::vector<std::string> targets,
                                               RelationshipAttributes attributes) {
  event_ref(event_id);
  if (sources.empty() || targets.empty()) {
    throw BuilderError(BuilderErrorCode::invalid_attribute,
                       "a relationship needs at least one source and one target entity");
  }
  sources = dedup(std::move(sources));
  targets = dedup(std::move(targets));
  const auto& participants = attachments_[event_id];
  for (const auto& list : {&sources, &targets}) {
    for (const auto& id : *list) {
      require_entity(id);
      if (!contains(participants, id)) {
        throw BuilderError(BuilderErrorCode::not_attached,
                           "'" + id + "' is not attached to " + event_id, {id, event_id});
      }
    }
  }
  Relationship rel;
  rel.id = format_id(kRelationshipPrefix, next_relationship_++);
  rel.included_entities = union_in_order(sources, targets);
  rel.direction = derive_direction(sources, targets);
  rel.source_entities = std::move(sources);
  rel.target_entities = std::move(targets);
  rel.emotional_type = std::move(attributes.emotional_type);
  rel.action_type = std::move(attributes.action_type);
  rel.strength = attributes.strength;
  rel.evolution = std::move(attributes.evolution);
  rel.event_id = event_id;
  relationships_.push_back(std::move(rel));
  return relationships_.back().id;
}

void FrameBuilder::set_bidirectional(const std::string& relationship_id, bool bidirectional) {
  auto& rel = relationship_ref(relationship_id);
  if (rel.direction == Direction::self) {
    throw BuilderError(BuilderErrorCode::self_relationship,
                       relationship_id + " is a self relationship and has no direction to toggle",
                       {relationship_id});
  }
  rel.direction = bidirectional ? Direction::bidirectional : Direction::unidirectional;
}

void FrameBuilder::link_events(const std::string& earlier, const std::string& later) {
  auto& first = event_ref(earlier);
  auto& second = event_ref(later);
  if (first.later_event == later) return;
  if (earlier == later) {
    throw BuilderError(BuilderErrorCode::cycle_detected, "an event cannot follow itself",
                       {earlier});
  }
  // Walking forward from `later` must not reach `earlier`.
  std::optional<std::string> cursor = later;
  while (cursor) {
    if (*cursor == earlier) {
      throw BuilderError(BuilderErrorCode::cycle_detected,
                         "linking " + earlier + " -> " + later + " would close a cycle",
                         {earlier, later});
    }
    cursor = event_ref(*cursor).later_event;
  }
  if (first.later_event) {
    throw BuilderError(BuilderErrorCode::branch_detected,
                       earlier + " is already followed by " + *first.later_event,
                       {earlier, *first.later_event, later});
  }
  if (second.earlier_event) {
    throw BuilderError(BuilderErrorCode::branch_detected,
                       later + " already follows " + *second.earlier_event,
                       {*second.earlier_event, later, earlier});
  }
  first.later_event = later;
  second.earlier_event = earlier;
}

void FrameBuilder::unlink_events(const std::string& earlier, const std::string& later) {
  auto& first = event_ref(earlier);
  auto& second = event_ref(later);
  if (first.later_event != later) {
    throw BuilderError(BuilderErrorCode::unknown_id,
                       "no link " + earlier + " -> " + later, {earlier, later});
  }
  first.later_event.reset();
  second.earlier_event.reset();
}

void FrameBuilder::assign_stage(const std::string& event_id, Stage stage) {
  event_ref(event_id);
  for (auto& ids : outline_.structure) erase_value(ids, event_id);
  outline_.stage(stage).push_back(event_id);
}

void FrameBuilder::set_outline(std::string title, std::string description) {
  require_text(title, "title");
  outline_.title = std::move(title);
  outline_.description = std::move(description);
}

void FrameBuilder::edit_entity(const std::string& entity_id, const EntityEdit& edit) {
  auto& e = entity_ref(entity_id);
  if (edit.name) require_text(*edit.name, "entity_name");
  if (edit.identity) require_text(*edit.identity, "entity_identity");
  if (edit.personality_traits) require_traits(*edit.personality_traits);
  if (edit.name) e.name = *edit.name;
  if (edit.identity) e.identity = *edit.identity;
  if (edit.motivation) e.motivation = *edit.motivation;
  if (edit.personality_traits) e.personality_traits = *edit.personality_traits;
}

void FrameBuilder::edit_event(const std::string& event_id, const EventEdit& edit) {
  auto& e = event_ref(event_id);
  if (edit.details) require_text(*edit.details, "event_details");
  if (edit.time) e.time = *edit.time;
  if (edit.location) e.location = *edit.location;
  if (edit.details) e.details = *edit.details;
  if (edit.importance) e.importance = *edit.importance;
}

void FrameBuilder::edit_relationship(const std::string& relationship_id,
                                     const RelationshipEdit& edit) {
  auto& r = relationship_ref(relationship_id);
  if (edit.emotional_type) r.emotional_type = *edit.emotional_type;
  if (edit.action_type) r.action_type = *edit.action_type;
  if (edit.evolution) r.evolution = *edit.evolution;
  if (edit.strength) r.strength = *edit.strength;
}

void FrameBuilder::remove_entity(const std::string& entity_id) {
  auto it = find_by_id(entities_, entity_id);
  if (it == entities_.end()) {
    throw BuilderError(BuilderErrorCode::unknown_id, "no entity '" + entity_id + "'", {entity_id});
  }
  entities_.erase(it);
  for (auto& [event, participants] : attachments_) erase_value(participants, entity_id);
  for (auto& r : relationships_) {
    erase_value(r.source_entities, entity_id);
    erase_value(r.target_entities, entity_id);
    erase_value(r.included_entities, entity_id);
    if (!r.source_entities.empty() && !r.target_entities.empty() &&
        derive_direction(r.source_entities, r.target_entities) == Direction::self) {
      r.direction = Direction::self;
    }
  }
  std::erase_if(relationships_, [](const Relationship& r) {
    return r.source_entities.empty() || r.target_entities.empty();
  });
}

void FrameBuilder::remove_event(const std::string& event_id) {
  auto& e = event_ref(event_id);
  auto before = e.earlier_event;
  auto after = e.later_event;
  if (before) event_ref(*before).later_event = after;
  if (after) event_ref(*after).earlier_event = before;
  events_.erase(find_by_id(events_, event_id));
  attachments_.erase(event_id);
  for (auto& ids : outline_.structure) erase_value(ids, event_id);
  std::erase_if(relationships_, [&](const Relationship& r) { return r.event_id == event_id; });
}

void FrameBuilder::remove_relationship(const std::string& relationship_id) {
  relationship_ref(relationship_id);
  relationships_.erase(find_by_id(relationships_, relationship_id));
}

StoryFrame FrameBuilder::draft() const {
  StoryFrame frame;
  frame.entities = entities_;
  frame.events = events_;
  frame.relationships = relationships_;
  frame.outline = outline_;
  return frame;
}

ValidationReport FrameBuilder::validate() const {
  auto report = validate_structure(draft());
  for (const auto& [event_id, participants] : attachments_) {
    if (!contains_id(events_, event_id)) {
      report.add(codes::kDanglingReference, "", "attachment to unknown event '" + event_id + "'",
                 {event_id});
      continue;
    }
    for (const auto& entity_id : participants) {
      if (!contains_id(entities_, entity_id)) {
        report.add(codes::kDanglingReference, "",
                   "unknown entity '" + entity_id + "' attached to " + event_id,
                   {event_id, entity_id});
      }
    }
  }
  for (std::size_t i = 0; i < relationships_.size(); ++i) {
    const auto& r = relationships_[i];
    if (!r.event_id || !contains_id(events_, *r.event_id)) continue;
    const auto& participants = this->participants(*r.event_id);
    for (const auto& entity_id : r.included_entities) {
      if (!contains(participants, entity_id)) {
        report.add(codes::kNotAttached, "/relationships/" + std::to_string(i),
                   "'" + entity_id + "' is not attached to " + *r.event_id,
                   {r.id, entity_id, *r.event_id});
      }
    }
  }
  return report;
}

StoryFrame FrameBuilder::commit() const {
  auto report = validate();
  if (!report.ok()) throw ValidationFailed(std::move(report));
  return draft();
}

Json FrameBuilder::to_json() const {
  Json attachments = Json::object();
  for (const auto& [event, participants] : attachments_) attachments[event] = participants;
  return {{"draft", to_json_document(draft())},
          {"attachments", std::move(attachments)},
          {"next_ids",
           {{"entity", next_entity_}, {"event", next_event_}, {"relationship", next_relationship_}}}};
}

FrameBuilder FrameBuilder::from_json(const Json& state) {
  const auto frame = decode_frame_unvalidated(state.at("draft"));
  FrameBuilder b;
  b.entities_ = frame.entities;
  b.events_ = frame.events;
  b.relationships_ = frame.relationships;
  b.outline_ = frame.outline;
  for (const auto& [event, participants] : state.at("attachments").items()) {
    b.attachments_[event] = participants.get<std::vector<std::string>>();
  }
  const auto& next = state.at("next_ids");
  b.next_entity_ = next.at("entity").get<std::uint32_t>();
  b.next_event_ = next.at("event").get<std::uint32_t>();
  b.next_relationship_ = next.at("relationship").get<std::uint32_t>();
  return b;
}

namespace {

const Json& field(const Json& op, const char* name) {
  auto it = op.find(name);
  if (it == op.end()) {
    throw BuilderError(BuilderErrorCode::invalid_op, std::string("missing field '") + name + "'");
  }
  return *it;
}

std::string text_field(const Json& op, const char* name) {
  const auto& value = field(op, name);
  if (!value.is_string()) {
    throw BuilderError(BuilderErrorCode::invalid_op, std::string("'") + name + "' must be a string");
  }
  return value.get<std::string>();
}

std::optional<std::string> optional_text(const Json& op, const char* name) {
  if (!op.contains(name)) return std::nullopt;
  return text_field(op, name);
}

std::vector<std::string> list_field(const Json& op, const char* name) {
  const auto& value = field(op, name);
  if (!value.is_array() ||
      !std::all_of(value.begin(), value.end(), [](const Json& v) { return v.is_string(); })) {
    throw BuilderError(BuilderErrorCode::invalid_op,
                       std::string("'") + name + "' must be an array of strings");
  }
  return value.get<std::vector<std::string>>();
}

std::optional<Level> optional_level(const Json& op, const char* name) {
  auto text = optional_text(op, name);
  if (!text) return std::nullopt;
  auto level = parse_level(*text);
  if (!level) {
    throw BuilderError(BuilderErrorCode::invalid_attribute,
                       std::string("'") + name + "' must be low, medium or high");
  }
  return level;
}

}  // namespace

Json apply_builder_op(FrameBuilder& b, const Json& op) {
  if (!op.is_object()) throw BuilderError(BuilderErrorCode::invalid_op, "op must be an object");
  const auto kind = text_field(op, "op");

  if (kind == "create_entity") {
    return b.create_entity(text_field(op, "entity_name"), text_field(op, "entity_identity"),
                           optional_text(op, "entity_motivation").value_or(""),
                           list_field(op, "personality_traits"));
  }
  if (kind == "create_event") {
    return b.create_event(optional_text(op, "event_time").value_or(""),
                          optional_text(op, "event_location").value_or(""),
                          text_field(op, "event_details"),
                          optional_level(op, "event_importance").value_or(Level::medium));
  }
  if (kind == "attach") {
    b.attach_entity(text_field(op, "event_id"), text_field(op, "entity_id"));
    return nullptr;
  }
  if (kind == "detach") {
    b.detach_entity(text_field(op, "event_id"), text_field(op, "entity_id"));
    return nullptr;
  }
  if (kind == "connect") {
    RelationshipAttributes attrs{optional_text(op, "emotional_type").value_or(""),
                                 optional_text(op, "action_type").value_or(""),
                                 optional_level(op, "relationship_strength").value_or(Level::medium),
                                 optional_text(op, "relationship_evolution").value_or("")};
    return b.connect_relationship(text_field(op, "event_id"), list_field(op, "source_entities"),
                                  list_field(op, "target_entities"), std::move(attrs));
  }
  if (kind == "set_bidirectional") {
    const auto& flag = field(op, "bidirectional");
    if (!flag.is_boolean()) {
      throw BuilderError(BuilderErrorCode::invalid_op, "'bidirectional' must be a boolean");
    }
    b.set_bidirectional(text_field(op, "relationship_id"), flag.get<bool>());
    return nullptr;
  }
  if (kind == "link" || kind == "unlink") {
    const auto earlier = text_field(op, "earlier_event");
    const auto later = text_field(op, "later_event");
    kind == "link" ? b.link_events(earlier, later) : b.unlink_events(earlier, later);
    return nullptr;
  }
  if (kind == "assign") {
    auto stage = parse_stage(text_field(op, "stage"));
    if (!stage) {
      throw BuilderError(BuilderErrorCode::invalid_attribute,
                         "stage must be beginning, middle, climax or ending");
    }
    b.assign_stage(text_field(op, "event_id"), *stage);
    return nullptr;
  }
  if (kind == "set_outline") {
    b.set_outline(text_field(op, "title"), optional_text(op, "story_description").value_or(""));
    return nullptr;
  }
  if (kind == "edit_entity") {
    EntityEdit edit{optional_text(op, "entity_name"), optional_text(op, "entity_identity"),
                    optional_text(op, "entity_motivation"), std::nullopt};
    if (op.contains("personality_traits")) edit.personality_traits = list_field(op, "personality_traits");
    b.edit_entity(text_field(op, "entity_id"), edit);
    return nullptr;
  }
  if (kind == "edit_event") {
    EventEdit edit{optional_text(op, "event_time"), optional_text(op, "event_location"),
                   optional_text(op, "event_details"), optional_level(op, "event_importance")};
    b.edit_event(text_field(op, "event_id"), edit);
    return nullptr;
  }
  if (kind == "edit_relationship") {
    RelationshipEdit edit{optional_text(op, "emotional_type"), optional_text(op, "action_type"),
                          optional_text(op, "relationship_evolution"),
                          optional_level(op, "relationship_strength")};
    b.edit_relationship(text_field(op, "relationship_id"), edit);
    return nullptr;
  }
  if (kind == "remove_entity") {
    b.remove_entity(text_field(op, "entity_id"));
    return nullptr;
  }
  if (kind == "remove_event") {
    b.remove_event(text_field(op, "event_id"));
    return nullptr;
  }
  if (kind == "remove_relationship") {
    b.remove_relationship(text_field(op, "relationship_id"));
    return nullptr;
  }
  throw BuilderError(BuilderErrorCode::invalid_op, "unknown op '" + kind + "'");
}

Json build_diagram(const StoryFrame& frame,
                   const std::map<std::string, std::vector<std::string>>& attachments) {
  std::map<std::string, std::string> stage_of;
  for (Stage s : kStages) {
    for (const auto& id : frame.outline.stage(s)) stage_of[id] = std::string(to_string(s));
  }

  Json nodes = Json::array();
  for (const auto& e : frame.entities) {
    nodes.push_back({{"id", e.id}, {"kind", "entity"}, {"label", e.name}, {"identity", e.identity}});
  }

  Json boxes = Json::array();
  for (const auto& e : frame.events) {
    std::vector<std::string> members;
    if (auto it = attachments.find(e.id); it != attachments.end()) {
      members = it->second;
    } else {
      for (const auto& r : frame.relationships) {
        if (r.event_id != e.id) continue;
        for (const auto& id : r.included_entities) {
          if (!contains(members, id)) members.push_back(id);
        }
      }
    }
    auto stage = stage_of.find(e.id);
    boxes.push_back({{"id", e.id},
                     {"kind", "event"},
                     {"label", e.details},
                     {"time", e.time},
                     {"location", e.location},
                     {"stage", stage == stage_of.end() ? Json(nullptr) : Json(stage->second)},
                     {"entities", members}});
  }

  Json edges = Json::array();
  for (const auto& e : frame.events) {
    if (e.later_event) {
      edges.push_back({{"kind", "sequence"}, {"from", {e.id}}, {"to", {*e.later_event}}});
    }
  }
  for (const auto& r : frame.relationships) {
    edges.push_back({{"kind", "relationship"},
                     {"id", r.id},
                     {"event_id", r.event_id ? Json(*r.event_id) : Json(nullptr)},
                     {"from", r.source_entities},
                     {"to", r.target_entities},
                     {"direction", to_string(r.direction)},
                     {"label", r.action_type}});
  }
  return {{"nodes", std::move(nodes)}, {"boxes", std::move(boxes)}, {"edges", std::move(edges)}};
}

}  // namespace storyframe
