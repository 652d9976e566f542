#pragma once

// Parse chain (story -> frame) and JSON2Story generation (frame -> story)
// driven through a ChatClient, with bounded JSON repair.

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "storyframe/llm_client.hpp"
#include "storyframe/story_model.hpp"
#include "storyframe/templates.hpp"
#include "storyframe/validation.hpp"

namespace storyframe {

enum class Strategy { zero_shot, tidd_ec, tidd_ec_cot, tidd_ec_chain };
inline constexpr std::array<Strategy, 4> kStrategies{Strategy::zero_shot, Strategy::tidd_ec,
                                                     Strategy::tidd_ec_cot, Strategy::tidd_ec_chain};
std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view text);

// Chain step order: entities, events, outline, relationships.
inline constexpr std::array<Unit, 4> kChainSteps{Unit::entities, Unit::events, Unit::outline,
                                                 Unit::relationships};

// One client call. attempt 0 is the first call of a step, 1.. are repairs.
struct TranscriptEntry {
  std::string step;
  int attempt = 0;
  std::string prompt;
  std::string response;
  std::string error;  // why the response was rejected, "" if accepted

  bool operator==(const TranscriptEntry&) const = default;
};
using Transcript = std::vector<TranscriptEntry>;
Json to_json(const Transcript& transcript);

enum class PipelineErrorKind { llm_unavailable, repair_exhausted, validation_failed,
                               empty_generation };
std::string_view to_string(PipelineErrorKind kind);

class PipelineError : public std::runtime_error {
 public:
  PipelineError(PipelineErrorKind kind, std::string step, std::string message,
                Transcript transcript = {}, ValidationReport report = {});
  PipelineErrorKind kind() const { return kind_; }
  const std::string& step() const { return step_; }
  // Client calls spent on the failing step.
  int attempts() const;
  const Transcript& transcript() const { return transcript_; }
  const ValidationReport& report() const { return report_; }

 private:
  PipelineErrorKind kind_;
  std::string step_;
  Transcript transcript_;
  ValidationReport report_;
};

// Pulls a JSON value out of a model reply: the body of the first ```json
// (or bare ```) fence if any, otherwise the first balanced {...} or [...]
// span that parses. Returns nullopt when nothing parses.
std::optional<Json> extract_json(std::string_view raw);

// Returns "" when the value is acceptable, otherwise the reason.
using JsonCheck = std::function<std::string(const Json&)>;

struct PipelineOptions {
  int max_repairs = 3;
  std::optional<double> temperature;
  std::optional<std::int64_t> seed;
};

struct ChainState {
  std::string story_text;
  std::vector<std::pair<std::string, Json>> step_results;
  Transcript transcript;
};

struct ParseResult {
  StoryFrame frame;
  ChainState state;
};

struct GenerationResult {
  std::string story;
  std::string prompt;
  Transcript transcript;
};

class Pipeline {
 public:
  explicit Pipeline(TemplateSet templates = TemplateSet::builtin(), PipelineOptions options = {});

  const TemplateSet& templates() const { return templates_; }
  const PipelineOptions& options() const { return options_; }

  // Prompt for one chain step given the results so far.
  std::string chain_step_prompt(Unit step, const std::string& story,
                                const std::vector<std::pair<std::string, Json>>& prior) const;
  // Single-shot prompt for the non-chain strategies.
  std::string single_shot_prompt(Strategy strategy, const std::string& story) const;

  ParseResult run_parse_chain(const std::string& story, Strategy strategy, ChatClient& client) const;

  // Sends `prompt`, then extracts and checks JSON from the reply. A rejected
  // reply is re-prompted with the rejection reason appended, at most
  // max_repairs times. Every call is appended to `transcript`.
  Json request_json(ChatClient& client, const std::string& step, const std::string& prompt,
                    const JsonCheck& check, Transcript& transcript) const;
  // Same, starting from an already received reply.
  Json repair_json(ChatClient& client, const std::string& step, const std::string& prompt,
                   std::string raw, const JsonCheck& check, Transcript& transcript) const;

  // `frame_json` is embedded verbatim, so ablated documents work too.
  std::string build_generation_prompt(const std::string& frame_json) const;
  std::string build_regeneration_prompt(const std::string& frame_json,
                                        const std::string& previous_story,
                                        const std::string& suggestion) const;

  GenerationResult generate_story(const StoryFrame& frame, ChatClient& client) const;
  GenerationResult generate_from_json(const std::string& frame_json, ChatClient& client) const;
  GenerationResult regenerate_story(const StoryFrame& frame, const std::string& previous_story,
                                    const std::string& suggestion, ChatClient& client) const;

  // One chat call carrying the configured sampling parameters. LlmError is
  // rethrown as PipelineError(llm_unavailable) with the transcript so far.
  std::string call(ChatClient& client, const std::string& step, const std::string& prompt,
                   int attempt, Transcript& transcript) const;

 private:
  GenerationResult complete_story(const std::string& prompt, const std::string& step,
                                  ChatClient& client) const;

  TemplateSet templates_;
  PipelineOptions options_;
};

}  // namespace storyframe
