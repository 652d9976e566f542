#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "suites.hpp"
#include "storyframe/frame_graph.hpp"
#include "storyframe/validation.hpp"

namespace storyframe {
namespace {

StoryFrame golden() { return from_canonical_json(fixtures::golden_bytes()); }

ValidationReport report_of(const Json& doc) {
  try {
    from_json_document(doc);
  } catch (const FrameParseError& e) {
    return e.report();
  }
  return {};
}

TEST(CanonicalJson, EmptyFrameHasFourEmptyUnits) {
  StoryFrame frame;
  frame.outline.title = "t";
  const auto doc = Json::parse(to_canonical_json(frame));
  ASSERT_EQ(doc.size(), 4u);
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"entities", "events", "relationships", "outline"}));
  EXPECT_TRUE(doc["entities"].empty());
  EXPECT_TRUE(doc["events"].empty());
  EXPECT_TRUE(doc["relationships"].empty());
  for (const auto& [stage, ids] : doc["outline"]["story_structure"].items()) EXPECT_TRUE(ids.empty());
  EXPECT_EQ(from_canonical_json(to_canonical_json(frame)), frame);
}

TEST(CanonicalJson, GoldenFileIsByteStable) {
  const auto bytes = fixtures::golden_bytes();
  const auto frame = from_canonical_json(bytes);
  EXPECT_EQ(to_canonical_json(frame), bytes);
  EXPECT_EQ(to_canonical_json(frame), to_canonical_json(frame));
  EXPECT_EQ(frame.entities.size(), 3u);
  EXPECT_EQ(frame.events.size(), 4u);
  EXPECT_EQ(frame.relationships.size(), 4u);
  EXPECT_EQ(frame.entities[0].name, "Jack");
  EXPECT_EQ(frame.entities[0].identity, "student");
  EXPECT_EQ(frame.events[0].time, "morning");
  EXPECT_EQ(frame.events[0].location, "basketball court");
}

TEST(CanonicalJson, KeyOrderIsNormalized) {
  auto doc = Json::parse(fixtures::golden_bytes());
  Json shuffled = Json::object();
  shuffled["outline"] = doc["outline"];
  shuffled["relationships"] = doc["relationships"];
  shuffled["events"] = doc["events"];
  shuffled["entities"] = doc["entities"];
  EXPECT_EQ(to_canonical_json(from_json_document(shuffled)), fixtures::golden_bytes());
}

TEST(CanonicalJson, UnicodeSurvivesRoundTrip) {
  auto frame = golden();
  frame.entities[1].name = "Ryán 李";
  const auto bytes = to_canonical_json(frame);
  EXPECT_NE(bytes.find("Ryán 李"), std::string::npos);
  EXPECT_EQ(from_canonical_json(bytes), frame);
}

TEST(FromCanonicalJson, MalformedJson) {
  try {
    from_canonical_json("{\"entities\": [");
    FAIL() << "expected FrameParseError";
  } catch (const FrameParseError& e) {
    EXPECT_TRUE(e.report().has(codes::kMalformedJson));
  }
}

TEST(FromCanonicalJson, DanglingEntityReference) {
  auto doc = Json::parse(fixtures::golden_bytes());
  doc["relationships"][0]["target_entities"][0] = "entity_9";
  doc["relationships"][0]["included_entities"][1] = "entity_9";
  const auto report = report_of(doc);
  ASSERT_TRUE(report.has(codes::kDanglingReference));
  bool found_path = false;
  for (const auto& v : report.violations) {
    if (v.code == codes::kDanglingReference && v.path.rfind("/relationships/0/", 0) == 0) found_path = true;
  }
  EXPECT_TRUE(found_path);
}

TEST(FromCanonicalJson, EmptyTraitsIsSchemaViolationAtPath) {
  auto doc = Json::parse(fixtures::golden_bytes());
  doc["entities"][2]["personality_traits"] = Json::array();
  const auto report = report_of(doc);
  ASSERT_TRUE(report.has(codes::kSchemaViolation));
  EXPECT_EQ(report.violations.front().path, "/entities/2/personality_traits");
}

TEST(FromCanonicalJson, ReportsEveryViolation) {
  auto doc = Json::parse(fixtures::golden_bytes());
  doc["entities"][0]["entity_name"] = "";
  doc["events"][1]["event_importance"] = "enormous";
  doc["relationships"][1]["relationship_strength"] = "strong";
  EXPECT_GE(report_of(doc).violations.size(), 3u);
}

TEST(FromCanonicalJson, FreeStringLevelsAreRejected) {
  auto doc = Json::parse(fixtures::golden_bytes());
  doc["events"][0]["event_importance"] = "High";
  EXPECT_TRUE(report_of(doc).has(codes::kSchemaViolation));
}

TEST(StripUnit, EventsRemovesKeyAndEmptiesStages) {
  const auto stripped = strip_unit(golden(), Unit::events);
  EXPECT_FALSE(stripped.contains("events"));
  for (const auto& [stage, ids] : stripped["outline"]["story_structure"].items()) EXPECT_TRUE(ids.empty());
  EXPECT_EQ(stripped["entities"], Json::parse(fixtures::golden_bytes())["entities"]);
  EXPECT_TRUE(validate_document(stripped, UnitSet::without(Unit::events)).ok());
  EXPECT_FALSE(validate_document(stripped, UnitSet::all()).ok());
}

TEST(StripUnit, OutlineRemovesOnlyOutline) {
  const auto original = Json::parse(fixtures::golden_bytes());
  const auto stripped = strip_unit(golden(), Unit::outline);
  EXPECT_FALSE(stripped.contains("outline"));
  EXPECT_EQ(stripped["entities"], original["entities"]);
  EXPECT_EQ(stripped["events"], original["events"]);
  EXPECT_EQ(stripped["relationships"], original["relationships"]);
  EXPECT_TRUE(validate_document(stripped, UnitSet::without(Unit::outline)).ok());
}

TEST(StripUnit, IsIdempotent) {
  for (Unit u : kUnits) {
    const auto once = strip_unit(golden(), u);
    EXPECT_EQ(strip_unit(once, u), once) << to_string(u);
  }
}

TEST(StripUnit, EntitiesCleansReferencesAndKeepsEvents) {
  const auto original = Json::parse(fixtures::golden_bytes());
  const auto stripped = strip_unit(golden(), Unit::entities);
  EXPECT_FALSE(stripped.contains("entities"));
  EXPECT_EQ(stripped["events"], original["events"]);
  EXPECT_EQ(stripped["outline"], original["outline"]);
  for (const auto& r : stripped["relationships"]) {
    EXPECT_TRUE(r["included_entities"].empty());
    EXPECT_TRUE(r["source_entities"].empty());
    EXPECT_TRUE(r["target_entities"].empty());
  }
  EXPECT_TRUE(validate_document(stripped, UnitSet::without(Unit::entities)).ok());
}

TEST(StripUnit, RelationshipsLeavesOtherUnitsUntouched) {
  const auto original = Json::parse(fixtures::golden_bytes());
  const auto stripped = strip_unit(golden(), Unit::relationships);
  EXPECT_FALSE(stripped.contains("relationships"));
  EXPECT_EQ(stripped["entities"], original["entities"]);
  EXPECT_EQ(stripped["events"], original["events"]);
  EXPECT_EQ(stripped["outline"], original["outline"]);
}

TEST(UnitSetNames, VariantNamesRoundTrip) {
  EXPECT_EQ(UnitSet::all().variant_name(), "full");
  for (Unit u : kUnits) {
    const auto name = UnitSet::without(u).variant_name();
    EXPECT_EQ(name, "without_" + std::string(to_string(u)));
    EXPECT_EQ(UnitSet::from_variant_name(name), UnitSet::without(u));
  }
}

TEST(MutationSuite, HundredSingleFieldCorruptionsAreCaught) {
  const auto outcome = suites::run_mutation_suite(Json::parse(fixtures::golden_bytes()), 100, 20240601);
  EXPECT_EQ(outcome.cases, 100);
  EXPECT_EQ(outcome.caught, 100);
  for (const auto& miss : outcome.misses) ADD_FAILURE() << miss;
}

TEST(MutationSuite, EveryMutationKindIsExercised) {
  EXPECT_GE(suites::frame_mutations().size(), 15u);
}

}  // namespace
}  // namespace storyframe
