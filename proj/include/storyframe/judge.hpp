#pragma once

// LLM-as-judge scoring on the seven-dimension rubric.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "storyframe/prompt_pipeline.hpp"

namespace storyframe {

inline constexpr std::array<std::string_view, 7> kDimensions{
    "functionality",  "technicality",           "innovativeness",        "readability",
    "thoughtfulness", "emotional_authenticity", "clarity_of_perspective"};

struct EvaluationReport {
  std::array<double, 7> dimensions{};         // indexed like kDimensions
  std::array<std::vector<int>, 7> raw_runs;  // one score per run
  int n_runs = 0;
  std::string suggestion;
  Transcript transcript;

  double dimension(std::string_view name) const;
  // Mean of the seven aggregates (unrounded).
  double mean() const;
};

// Aggregates are the mean of the raw runs rounded to 2 decimals.
Json to_json(const EvaluationReport& report, bool with_transcript = false);
// Rebuilds a report and checks the aggregate invariant; throws
// std::invalid_argument otherwise.
EvaluationReport evaluation_report_from_json(const Json& doc);

double round2(double value);

// Scores from a judge reply: an object with exactly the seven dimensions,
// each an integer in 1..5. Returns "" or the reason the reply is unusable.
std::string check_scores(const Json& value);

// Runs the judge prompt n_runs times on every judge client (raw runs are
// concatenated across judges), then asks the first judge for one revision
// suggestion.
EvaluationReport judge_story(const Pipeline& pipeline, const std::string& story,
                             const std::string& frame_json, const std::vector<ChatClient*>& judges,
                             int n_runs = 3);

std::string build_judge_prompt(const Pipeline& pipeline, const std::string& story,
                               const std::string& frame_json);

}  // namespace storyframe
