#pragma once

// Strategy comparison: parse each story under every prompting strategy and
// score the parse by tree edit distance to a gold frame document.

#include <string>
#include <vector>

#include "storyframe/prompt_pipeline.hpp"

namespace storyframe {

struct Quartiles {
  double min = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double max = 0;
};

// Linear interpolation between order statistics. Throws
// std::invalid_argument on an empty sample.
Quartiles quartiles(std::vector<double> values);

struct StrategyDistances {
  Strategy strategy = Strategy::tidd_ec_chain;
  std::vector<double> distances;  // one per story, corpus order
  std::vector<Json> failures;     // {index, step, error, message}
};

// A parse that fails is scored as the distance from an empty object to the
// gold document, so failures count against a strategy.
std::vector<StrategyDistances> compare_strategies(const std::vector<std::string>& stories,
                                                  const std::vector<Json>& gold,
                                                  const Pipeline& pipeline, ChatClient& client);

Json to_json(const std::vector<StrategyDistances>& results);

}  // namespace storyframe
