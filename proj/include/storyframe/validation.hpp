#pragma once

// Schema and structural validation for frame documents.

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "storyframe/story_model.hpp"

namespace storyframe {

namespace codes {
inline constexpr std::string_view kMalformedJson = "MALFORMED_JSON";
inline constexpr std::string_view kSchemaViolation = "SCHEMA_VIOLATION";
inline constexpr std::string_view kDanglingReference = "DANGLING_REFERENCE";
inline constexpr std::string_view kInvalidId = "INVALID_ID";
inline constexpr std::string_view kDuplicateId = "DUPLICATE_ID";
inline constexpr std::string_view kRelationshipMembers = "RELATIONSHIP_MEMBERS";
inline constexpr std::string_view kDirectionInvalid = "DIRECTION_INVALID";
inline constexpr std::string_view kNotAttached = "NOT_ATTACHED";
inline constexpr std::string_view kChainInconsistent = "CHAIN_INCONSISTENT";
inline constexpr std::string_view kChainBranch = "CHAIN_BRANCH";
inline constexpr std::string_view kChainCycle = "CHAIN_CYCLE";
inline constexpr std::string_view kChainDisconnected = "CHAIN_DISCONNECTED";
inline constexpr std::string_view kOutlineIncomplete = "OUTLINE_INCOMPLETE";
inline constexpr std::string_view kOutlineDuplicate = "OUTLINE_DUPLICATE";
inline constexpr std::string_view kStageOrder = "STAGE_ORDER";
}  // namespace codes

struct Violation {
  std::string code;
  std::string path;  // JSON pointer into the document, "" for the whole frame
  std::string message;
  std::vector<std::string> subjects;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
  void add(std::string_view code, std::string path, std::string message,
           std::vector<std::string> subjects = {});
  // One line per violation, for logs and repair prompts.
  std::string summary() const;

  bool operator==(const ValidationReport&) const = default;
};

Json to_json(const ValidationReport& report);

class FrameParseError : public std::runtime_error {
 public:
  explicit FrameParseError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

// Validates `doc` against the schema variant whose units are `expected`.
// Cross-references into absent units are not checked.
ValidationReport validate_document(const Json& doc, UnitSet expected);

// Parses `bytes` and validates; malformed JSON yields MALFORMED_JSON.
ValidationReport validate_bytes(std::string_view bytes, UnitSet expected);

// Structural validation of an in-memory frame.
ValidationReport validate_structure(const StoryFrame& frame);

// Machine-readable JSON Schema (draft 2020-12) for a schema variant. The
// checked-in files under schemas/ are generated from this.
Json frame_json_schema(UnitSet units);

}  // namespace storyframe
