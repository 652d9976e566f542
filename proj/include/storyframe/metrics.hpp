#pragma once

// Text and structure metrics: ROUGE-L, METEOR (exact match), tree edit
// distance over JSON, Mann-Whitney U, and embedding-based BERTScore.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace storyframe {

using Json = nlohmann::ordered_json;
class ChatClient;

// Lowercases (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic) and splits
// UTF-8 text into words. Whitespace and punctuation separate words and are
// dropped. Locale-independent.
std::vector<std::string> tokenize(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct RougeScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

RougeScore rouge_l(const std::vector<std::string>& reference,
                   const std::vector<std::string>& hypothesis);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
  // Nodes the exact chunk search may visit before falling back to the
  // greedy alignment.
  std::size_t search_budget = 200'000;
};

struct MeteorDetail {
  double score = 0;
  double precision = 0;
  double recall = 0;
  double fmean = 0;
  double penalty = 0;
  std::size_t matches = 0;
  std::size_t chunks = 0;
  bool exact_search = true;  // false when the budget ran out
};

MeteorDetail meteor_detail(const std::vector<std::string>& reference,
                           const std::vector<std::string>& hypothesis,
                           const MeteorParams& params = {});
double meteor(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);

struct LabeledTree {
  std::string label;
  std::vector<LabeledTree> children;

  std::size_t size() const;
  bool operator==(const LabeledTree&) const = default;
};

// Objects become "obj" with one child per key (sorted), labeled by the key
// and holding the value's subtree; arrays become "arr"; scalars become
// leaves "str:<s>", "num:<n>", "bool:<b>" or "null:null".
LabeledTree json_to_tree(const Json& doc);

// Unit-cost ordered tree edit distance (Zhang-Shasha).
std::size_t tree_edit_distance(const LabeledTree& a, const LabeledTree& b);

enum class UTestMethod { exact, normal_approx };
std::string_view to_string(UTestMethod method);

struct UTestResult {
  double u_statistic = 0;  // U of the first sample
  double p_value = 1;      // two-sided
  UTestMethod method = UTestMethod::exact;
  bool degenerate = false;  // every value identical; p is 1 by convention
};

// Midranks for ties. Exact p when n + m <= 16 and there are no ties,
// otherwise the normal approximation with tie and continuity correction.
// `force` selects a method; exact is rejected when there are ties.
// Throws std::invalid_argument on an empty sample.
UTestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                           std::optional<UTestMethod> force = std::nullopt);

// Exact two-sided p for U with sample sizes n and m, no ties.
double mann_whitney_exact_p(std::size_t n, std::size_t m, double u);

class FeatureDisabled : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Greedy cosine matching between the token embeddings of the two texts.
// Throws FeatureDisabled without an embedding client.
RougeScore bertscore(const std::string& reference, const std::string& hypothesis,
                     ChatClient* embedder);

}  // namespace storyframe
