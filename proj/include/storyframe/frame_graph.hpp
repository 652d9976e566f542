#pragma once

// Mutable frame construction: the drag-and-drop / attach / connect / edit
// operations of the studio, with eager checks on the event chain and full
// validation at commit.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "storyframe/story_model.hpp"
#include "storyframe/validation.hpp"

namespace storyframe {

enum class BuilderErrorCode {
  invalid_attribute,
  unknown_id,
  not_attached,
  self_relationship,
  cycle_detected,
  branch_detected,
  invalid_op,
};

// "InvalidAttribute", "UnknownId", ... as used in service error bodies.
std::string_view to_string(BuilderErrorCode code);

class BuilderError : public std::runtime_error {
 public:
  BuilderError(BuilderErrorCode code, std::string message, std::vector<std::string> subjects = {});
  BuilderErrorCode code() const { return code_; }
  const std::vector<std::string>& subjects() const { return subjects_; }

 private:
  BuilderErrorCode code_;
  std::vector<std::string> subjects_;
};

class ValidationFailed : public std::runtime_error {
 public:
  explicit ValidationFailed(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct RelationshipAttributes {
  std::string emotional_type;
  std::string action_type;
  Level strength = Level::medium;
  std::string evolution;
};

// Partial edits; unset fields are left unchanged.
struct EntityEdit {
  std::optional<std::string> name, identity, motivation;
  std::optional<std::vector<std::string>> personality_traits;
};
struct EventEdit {
  std::optional<std::string> time, location, details;
  std::optional<Level> importance;
};
struct RelationshipEdit {
  std::optional<std::string> emotional_type, action_type, evolution;
  std::optional<Level> strength;
};

class FrameBuilder {
 public:
  FrameBuilder() = default;

  // Seeds a builder from a committed frame. Event participants are
  // reconstructed from the relationships drawn inside each event box.
  static FrameBuilder from_frame(const StoryFrame& frame);

  std::string create_entity(std::string name, std::string identity, std::string motivation,
                            std::vector<std::string> personality_traits);
  std::string create_event(std::string time, std::string location, std::string details,
                           Level importance = Level::medium);

  void attach_entity(const std::string& event_id, const std::string& entity_id);
  void detach_entity(const std::string& event_id, const std::string& entity_id);

  // Direction is derived: self when sources and targets are the same single
  // entity, unidirectional otherwise. Every entity must be attached to the
  // event.
  std::string connect_relationship(const std::string& event_id,
                                   std::vector<std::string> sources,
                                   std::vector<std::string> targets,
                                   RelationshipAttributes attributes);
  void set_bidirectional(const std::string& relationship_id, bool bidirectional);

  void link_events(const std::string& earlier, const std::string& later);
  void unlink_events(const std::string& earlier, const std::string& later);

  void assign_stage(const std::string& event_id, Stage stage);
  void set_outline(std::string title, std::string description);

  void edit_entity(const std::string& entity_id, const EntityEdit& edit);
  void edit_event(const std::string& event_id, const EventEdit& edit);
  void edit_relationship(const std::string& relationship_id, const RelationshipEdit& edit);

  // Removal cascades: attachments go with the entity, and relationships
  // left without sources or targets are dropped. Removing an event bridges
  // its chain neighbours and drops the relationships drawn inside it.
  void remove_entity(const std::string& entity_id);
  void remove_event(const std::string& event_id);
  void remove_relationship(const std::string& relationship_id);

  ValidationReport validate() const;
  // Throws ValidationFailed carrying the same report as validate().
  StoryFrame commit() const;
  // Current state as a frame, without validation.
  StoryFrame draft() const;

  const std::vector<std::string>& participants(const std::string& event_id) const;
  const std::map<std::string, std::vector<std::string>>& attachments() const {
    return attachments_;
  }

  Json to_json() const;
  static FrameBuilder from_json(const Json& state);

  bool operator==(const FrameBuilder&) const = default;

 private:
  Entity& entity_ref(const std::string& id);
  Event& event_ref(const std::string& id);
  Relationship& relationship_ref(const std::string& id);
  void require_entity(const std::string& id) const;

  std::vector<Entity> entities_;
  std::vector<Event> events_;
  std::vector<Relationship> relationships_;
  Outline outline_;
  std::map<std::string, std::vector<std::string>> attachments_;
  std::uint32_t next_entity_ = 1;
  std::uint32_t next_event_ = 1;
  std::uint32_t next_relationship_ = 1;
};

// Applies one JSON-encoded builder operation, e.g.
//   {"op": "link", "earlier_event": "event_1", "later_event": "event_2"}.
// Returns the created id for create/connect ops, null otherwise. Throws
// BuilderError (invalid_op for malformed envelopes).
Json apply_builder_op(FrameBuilder& builder, const Json& op);

// Framework diagram: entity nodes, event boxes and typed edges.
Json build_diagram(const StoryFrame& frame,
                   const std::map<std::string, std::vector<std::string>>& attachments = {});

}  // namespace storyframe
