#include "storyframe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "storyframe/metrics.hpp"

namespace storyframe {

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

std::vector<StrategyDistances> compare_strategies(const std::vector<std::string>& stories,
                                                  const std::vector<Json>& gold,
                                                  const Pipeline& pipeline, ChatClient& client) {
  if (stories.size() != gold.size()) {
    throw std::invalid_argument("corpus has " + std::to_string(stories.size()) + " stories but " +
                                std::to_string(gold.size()) + " gold frames");
  }
  std::vector<LabeledTree> gold_trees;
  for (const auto& g : gold) gold_trees.push_back(json_to_tree(g));
  const auto empty = json_to_tree(Json::object());

  std::vector<StrategyDistances> results;
  for (const auto strategy : kStrategies) {
    StrategyDistances row;
    row.strategy = strategy;
    for (std::size_t i = 0; i < stories.size(); ++i) {
      try {
        const auto parsed = pipeline.run_parse_chain(stories[i], strategy, client);
        row.distances.push_back(static_cast<double>(
            tree_edit_distance(json_to_tree(to_json_document(parsed.frame)), gold_trees[i])));
      } catch (const PipelineError& e) {
        row.failures.push_back({{"index", i},
                                {"step", e.step()},
                                {"error", to_string(e.kind())},
                                {"message", e.what()}});
        row.distances.push_back(static_cast<double>(tree_edit_distance(empty, gold_trees[i])));
      }
    }
    results.push_back(std::move(row));
  }
  return results;
}

Json to_json(const std::vector<StrategyDistances>& results) {
  Json strategies = Json::object();
  for (const auto& row : results) {
    Json entry = {{"n", row.distances.size()}, {"distances", row.distances}};
    if (!row.distances.empty()) {
      const auto q = quartiles(row.distances);
      entry["min"] = q.min;
      entry["q1"] = q.q1;
      entry["median"] = q.median;
      entry["q3"] = q.q3;
      entry["max"] = q.max;
    }
    entry["failures"] = row.failures;
    strategies[std::string(to_string(row.strategy))] = std::move(entry);
  }
  return {{"metric", "tree_edit_distance"}, {"strategies", strategies}};
}

}  // namespace storyframe
