#pragma once

// The four foundational story units (entity, event, relationship, outline)
// and the StoryFrame aggregate, plus canonical JSON serialization.
//
// Canonical JSON uses a fixed key order (schema order below), lists in
// declaration order, UTF-8 and two-space indentation. Two serializations of
// equal frames are byte-identical.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace storyframe {

using Json = nlohmann::ordered_json;

enum class Level { low, medium, high };
enum class Direction { self, unidirectional, bidirectional };
enum class Stage { beginning, middle, climax, ending };
enum class Unit { entities, events, relationships, outline };

inline constexpr std::array<Stage, 4> kStages{Stage::beginning, Stage::middle,
                                              Stage::climax, Stage::ending};
inline constexpr std::array<Unit, 4> kUnits{Unit::entities, Unit::events,
                                            Unit::relationships, Unit::outline};

std::string_view to_string(Level level);
std::string_view to_string(Direction direction);
std::string_view to_string(Stage stage);
std::string_view to_string(Unit unit);

std::optional<Level> parse_level(std::string_view text);
std::optional<Direction> parse_direction(std::string_view text);
std::optional<Stage> parse_stage(std::string_view text);
std::optional<Unit> parse_unit(std::string_view text);

constexpr std::size_t index_of(Stage stage) { return static_cast<std::size_t>(stage); }

// Ids look like `entity_3`, `event_1`, `relationship_12`.
inline constexpr std::string_view kEntityPrefix = "entity";
inline constexpr std::string_view kEventPrefix = "event";
inline constexpr std::string_view kRelationshipPrefix = "relationship";

std::string format_id(std::string_view prefix, std::uint32_t number);
// Returns the positive number of a well-formed id, nullopt otherwise.
std::optional<std::uint32_t> parse_id(std::string_view prefix, std::string_view id);

struct Entity {
  std::string id;
  std::string name;
  std::string identity;
  std::string motivation;
  std::vector<std::string> personality_traits;

  bool operator==(const Entity&) const = default;
};

struct Event {
  std::string id;
  std::string time;
  std::string location;
  std::string details;
  Level importance = Level::medium;
  std::optional<std::string> earlier_event;
  std::optional<std::string> later_event;

  bool operator==(const Event&) const = default;
};

struct Relationship {
  std::string id;
  std::vector<std::string> included_entities;
  std::vector<std::string> source_entities;
  std::vector<std::string> target_entities;
  std::string emotional_type;
  std::string action_type;
  Direction direction = Direction::unidirectional;
  Level strength = Level::medium;
  std::string evolution;
  // Event box the relationship was drawn in. Not part of the four-unit
  // attribute list; serialized as `event_id` (null when absent).
  std::optional<std::string> event_id;

  bool operator==(const Relationship&) const = default;
};

struct Outline {
  std::string title;
  std::string description;
  // Indexed by Stage: beginning, middle, climax, ending.
  std::array<std::vector<std::string>, 4> structure;

  std::vector<std::string>& stage(Stage s) { return structure[index_of(s)]; }
  const std::vector<std::string>& stage(Stage s) const { return structure[index_of(s)]; }

  bool operator==(const Outline&) const = default;
};

struct StoryFrame {
  std::vector<Entity> entities;
  std::vector<Event> events;
  std::vector<Relationship> relationships;
  Outline outline;

  const Entity* find_entity(std::string_view id) const;
  const Event* find_event(std::string_view id) const;
  const Relationship* find_relationship(std::string_view id) const;

  bool operator==(const StoryFrame&) const = default;
};

// Set of units present in a document. The full schema has all four; an
// ablation variant has exactly one missing.
class UnitSet {
 public:
  constexpr UnitSet() = default;
  static constexpr UnitSet all() { return UnitSet{0b1111}; }
  static constexpr UnitSet none() { return UnitSet{0}; }
  static constexpr UnitSet without(Unit u) { return all().erase(u); }

  constexpr bool contains(Unit u) const { return (bits_ & bit(u)) != 0; }
  constexpr UnitSet insert(Unit u) const { return UnitSet(bits_ | bit(u)); }
  constexpr UnitSet erase(Unit u) const { return UnitSet(bits_ & ~bit(u)); }
  constexpr bool operator==(const UnitSet&) const = default;

  // "full", "without_events", ... for the five schema variants; other
  // combinations render as "partial_<units>".
  std::string variant_name() const;
  static std::optional<UnitSet> from_variant_name(std::string_view name);

 private:
  constexpr explicit UnitSet(unsigned bits) : bits_(bits) {}
  static constexpr unsigned bit(Unit u) { return 1u << static_cast<unsigned>(u); }
  unsigned bits_ = 0;
};

// Units whose top-level key is present in a JSON object.
UnitSet units_present(const Json& doc);

Json to_json_document(const StoryFrame& frame);
std::string to_canonical_json(const StoryFrame& frame);
std::string to_canonical_json(const Json& doc);

// Parses and fully validates a frame document. Throws FrameParseError
// (see validation.hpp) listing every violation with its JSON path.
StoryFrame from_canonical_json(std::string_view bytes);
StoryFrame from_json_document(const Json& doc);
// Decodes a document with the canonical field types without checking any
// invariant. Used for builder drafts, which may be incomplete.
StoryFrame decode_frame_unvalidated(const Json& doc);

// Removes one unit from a frame document for ablation. Removing events also
// empties the outline stages; removing entities also empties the entity
// lists of relationships. Idempotent.
Json strip_unit(const Json& doc, Unit unit);
Json strip_unit(const StoryFrame& frame, Unit unit);

}  // namespace storyframe
