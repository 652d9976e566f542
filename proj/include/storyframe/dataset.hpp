#pragma once

// Preference-dataset construction: corpus ingestion, Chosen/Rejected pairs,
// ablation variants, train/test split and statistics.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "storyframe/judge.hpp"
#include "storyframe/prompt_pipeline.hpp"

namespace storyframe {

class EmptyCorpus : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPair : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits corpus text into stories: on `<|endoftext|>` when present,
// otherwise one story per non-empty line. Stories are trimmed.
std::vector<std::string> split_corpus_text(const std::string& text);

// Reads a file, or every *.txt file of a directory in name order, and drops
// repeated stories (by SHA-256) keeping first occurrences. Throws IoError or
// EmptyCorpus.
std::vector<std::string> ingest_corpus(const std::filesystem::path& path);

using ScoreMap = std::array<double, 7>;  // indexed like kDimensions

struct PreferencePair {
  std::string pair_id;
  std::string frame_json;  // canonical JSON, possibly ablated
  std::string prompt;      // the generation prompt for frame_json
  std::string chosen;
  std::string rejected;
  ScoreMap chosen_scores{};
  ScoreMap rejected_scores{};
  std::string source_digest;

  bool operator==(const PreferencePair&) const = default;
};

double mean_score(const ScoreMap& scores);

Json to_json(const PreferencePair& pair);
// Parses one record and checks every pair invariant; throws InvalidPair.
PreferencePair pair_from_json(const Json& doc);
// "" when the pair is sound, otherwise the first broken invariant.
std::string check_pair(const PreferencePair& pair);

std::string to_jsonl(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> parse_jsonl(const std::string& text);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

struct BuildClients {
  ChatClient* parse = nullptr;
  ChatClient* generate = nullptr;
  std::vector<ChatClient*> judges;
};

struct BuildOptions {
  Strategy strategy = Strategy::tidd_ec_chain;
  int judge_runs = 3;
  int parallelism = 1;  // stories processed at once
};

// Parses the story, regenerates a story from the frame, judges both and
// labels the higher mean Chosen. Equal means keep the original as Chosen.
// Pipeline errors propagate.
PreferencePair build_pair(const Pipeline& pipeline, const std::string& story,
                          const BuildClients& clients, const BuildOptions& options = {});

struct DatasetManifest {
  std::size_t total_pairs = 0;
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> test_size;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string schema_variant = "full";
  std::size_t failures = 0;
  Json score_statistics = Json::object();
  Json distributions = Json::object();
  Json story_length = Json::object();
};

Json to_json(const DatasetManifest& manifest);

struct BuildResult {
  std::vector<PreferencePair> pairs;  // in corpus order
  std::vector<Json> failures;         // {index, source_digest, step, error, message}
  DatasetManifest manifest;
};

// Skips a story (with a failure record) on RepairExhausted,
// ValidationFailed, EmptyGeneration or identical stories; LlmUnavailable
// aborts the build.
BuildResult build_dataset(const std::vector<std::string>& stories, const Pipeline& pipeline,
                          const BuildClients& clients, const BuildOptions& options = {});

// Writes pairs.jsonl, manifest.json and failures.jsonl into `dir`.
void write_dataset(const std::filesystem::path& dir, const BuildResult& result);

// Strips `unit` from every frame and rebuilds the prompt; stories and
// scores are untouched.
std::vector<PreferencePair> ablate_dataset(const std::vector<PreferencePair>& pairs, Unit unit,
                                           const Pipeline& pipeline);

struct SplitRatio {
  unsigned train = 9;
  unsigned test = 1;
};
// Parses "9:1"; throws std::invalid_argument.
SplitRatio parse_ratio(const std::string& text);
// round(N * train / (train + test)), halves rounded up.
std::size_t train_size_for(std::size_t n, SplitRatio ratio);

struct SplitResult {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> test;
  DatasetManifest manifest;
};

// Fisher-Yates shuffle driven by mt19937_64 with rejection sampling (so the
// permutation is the same on every platform), then the first
// train_size_for(N) pairs go to train.
SplitResult split_dataset(const std::vector<PreferencePair>& pairs, SplitRatio ratio,
                          std::uint64_t seed);

// Counts of categorical frame attributes, per-dimension score histograms
// (bins 1..5 by nearest integer) and story lengths in tokens.
DatasetManifest dataset_stats(const std::vector<PreferencePair>& pairs);

}  // namespace storyframe
