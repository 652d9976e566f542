#include "storyframe/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "storyframe/digest.hpp"
#include "storyframe/io.hpp"
#include "storyframe/metrics.hpp"
#include "storyframe/validation.hpp"

namespace storyframe {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

constexpr std::string_view kEndOfText = "<|endoftext|>";

Json scores_to_json(const ScoreMap& scores) {
  Json out = Json::object();
  for (std::size_t i = 0; i < kDimensions.size(); ++i) out[std::string(kDimensions[i])] = scores[i];
  return out;
}

ScoreMap scores_from_json(const Json& doc, const std::string& field) {
  if (!doc.is_object() || doc.size() != kDimensions.size()) {
    throw InvalidPair(field + " must hold exactly the seven dimensions");
  }
  ScoreMap scores{};
  for (std::size_t i = 0; i < kDimensions.size(); ++i) {
    const std::string name(kDimensions[i]);
    if (!doc.contains(name) || !doc.at(name).is_number()) {
      throw InvalidPair(field + "." + name + " must be a number");
    }
    scores[i] = doc.at(name).get<double>();
  }
  return scores;
}

bool is_hex_digest(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

std::vector<std::string> split_corpus_text(const std::string& text) {
  std::vector<std::string> stories;
  if (text.find(kEndOfText) != std::string::npos) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto next = text.find(kEndOfText, pos);
      const auto piece = trim(text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (!piece.empty()) stories.push_back(piece);
      if (next == std::string::npos) break;
      pos = next + kEndOfText.size();
    }
    return stories;
  }
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto story = trim(line);
    if (!story.empty()) stories.push_back(std::move(story));
  }
  return stories;
}

std::vector<std::string> ingest_corpus(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (std::filesystem::exists(path, ec)) {
    files.push_back(path);
  } else {
    throw IoError("corpus not found: " + path.string());
  }
  std::vector<std::string> stories;
  std::set<std::string> seen;
  for (const auto& file : files) {
    for (auto& story : split_corpus_text(read_file(file))) {
      if (seen.insert(sha256_hex(story)).second) stories.push_back(std::move(story));
    }
  }
  if (stories.empty()) throw EmptyCorpus("no stories in " + path.string());
  return stories;
}

double mean_score(const ScoreMap& scores) {
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

Json to_json(const PreferencePair& pair) {
  return {{"pair_id", pair.pair_id},
          {"frame_json", pair.frame_json},
          {"prompt", pair.prompt},
          {"chosen", pair.chosen},
          {"rejected", pair.rejected},
          {"chosen_scores", scores_to_json(pair.chosen_scores)},
          {"rejected_scores", scores_to_json(pair.rejected_scores)},
          {"source_digest", pair.source_digest}};
}

std::string check_pair(const PreferencePair& pair) {
  if (pair.pair_id.empty()) return "pair_id is empty";
  if (pair.chosen == pair.rejected) return "chosen and rejected are identical";
  if (trim(pair.chosen).empty() || trim(pair.rejected).empty()) return "a story is empty";
  for (const auto* scores : {&pair.chosen_scores, &pair.rejected_scores}) {
    for (double s : *scores) {
      if (!(s >= 1.0 && s <= 5.0)) return "scores must lie in [1, 5]";
    }
  }
  if (mean_score(pair.chosen_scores) < mean_score(pair.rejected_scores)) {
    return "chosen mean score is below rejected mean score";
  }
  if (!is_hex_digest(pair.source_digest)) return "source_digest is not a SHA-256 hex digest";
  Json doc = Json::parse(pair.frame_json, nullptr, false);
  if (doc.is_discarded()) return "frame_json is not JSON";
  if (to_canonical_json(doc) != pair.frame_json) return "frame_json is not canonical";
  auto report = validate_document(doc, units_present(doc));
  if (!report.ok()) return "frame_json fails its schema: " + report.summary();
  if (pair.prompt.find(pair.frame_json) == std::string::npos) {
    return "prompt does not embed frame_json";
  }
  return "";
}

PreferencePair pair_from_json(const Json& doc) {
  static const std::vector<std::string> kFields{"pair_id",       "frame_json",      "prompt",
                                                "chosen",        "rejected",        "chosen_scores",
                                                "rejected_scores", "source_digest"};
  if (!doc.is_object()) throw InvalidPair("a pair record must be a JSON object");
  for (const auto& f : kFields) {
    if (!doc.contains(f)) throw InvalidPair("missing field " + f);
  }
  if (doc.size() != kFields.size()) throw InvalidPair("unexpected fields in pair record");
  PreferencePair pair;
  try {
    pair.pair_id = doc.at("pair_id").get<std::string>();
    pair.frame_json = doc.at("frame_json").get<std::string>();
    pair.prompt = doc.at("prompt").get<std::string>();
    pair.chosen = doc.at("chosen").get<std::string>();
    pair.rejected = doc.at("rejected").get<std::string>();
    pair.source_digest = doc.at("source_digest").get<std::string>();
  } catch (const Json::exception& e) {
    throw InvalidPair(std::string("field type mismatch: ") + e.what());
  }
  pair.chosen_scores = scores_from_json(doc.at("chosen_scores"), "chosen_scores");
  pair.rejected_scores = scores_from_json(doc.at("rejected_scores"), "rejected_scores");
  if (auto problem = check_pair(pair); !problem.empty()) {
    throw InvalidPair(pair.pair_id + ": " + problem);
  }
  return pair;
}

std::string to_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& pair : pairs) {
    out += to_json(pair).dump();
    out += '\n';
  }
  return out;
}

std::vector<PreferencePair> parse_jsonl(const std::string& text) {
  std::vector<PreferencePair> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw InvalidPair("line " + std::to_string(number) + " is not JSON");
    try {
      pairs.push_back(pair_from_json(doc));
    } catch (const InvalidPair& e) {
      throw InvalidPair("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return pairs;
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) {
  return parse_jsonl(read_file(path));
}

PreferencePair build_pair(const Pipeline& pipeline, const std::string& story,
                          const BuildClients& clients, const BuildOptions& options) {
  if (!clients.parse || !clients.generate || clients.judges.empty()) {
    throw std::invalid_argument("build_pair needs parse, generation and judge clients");
  }
  const auto parsed = pipeline.run_parse_chain(story, options.strategy, *clients.parse);
  const auto frame_json = to_canonical_json(parsed.frame);
  const auto generated = pipeline.generate_from_json(frame_json, *clients.generate);
  const auto original_report =
      judge_story(pipeline, story, frame_json, clients.judges, options.judge_runs);
  const auto generated_report =
      judge_story(pipeline, generated.story, frame_json, clients.judges, options.judge_runs);

  PreferencePair pair;
  pair.source_digest = sha256_hex(story);
  pair.pair_id = "pair_" + pair.source_digest.substr(0, 16);
  pair.frame_json = frame_json;
  pair.prompt = generated.prompt;
  const bool generated_wins = mean_score(generated_report.dimensions) > mean_score(original_report.dimensions);
  pair.chosen = generated_wins ? generated.story : story;
  pair.rejected = generated_wins ? story : generated.story;
  pair.chosen_scores = generated_wins ? generated_report.dimensions : original_report.dimensions;
  pair.rejected_scores = generated_wins ? original_report.dimensions : generated_report.dimensions;
  return pair;
}

Json to_json(const DatasetManifest& m) {
  auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
  return {{"total_pairs", m.total_pairs},
          {"train_size", opt(m.train_size)},
          {"test_size", opt(m.test_size)},
          {"seed", opt(m.seed)},
          {"strategy", m.strategy},
          {"schema_variant", m.schema_variant},
          {"failures", m.failures},
          {"score_statistics", m.score_statistics},
          {"distributions", m.distributions},
          {"story_length", m.story_length}};
}

BuildResult build_dataset(const std::vector<std::string>& stories, const Pipeline& pipeline,
                          const BuildClients& clients, const BuildOptions& options) {
  struct Slot {
    std::optional<PreferencePair> pair;
    std::optional<Json> failure;
  };
  std::vector<Slot> slots(stories.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr fatal;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= stories.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (fatal) return;
      }
      const auto digest = sha256_hex(stories[i]);
      auto fail = [&](const std::string& step, std::string_view error, const std::string& message) {
        slots[i].failure = Json{{"index", i},
                                {"source_digest", digest},
                                {"step", step},
                                {"error", error},
                                {"message", message}};
      };
      try {
        auto pair = build_pair(pipeline, stories[i], clients, options);
        if (auto problem = check_pair(pair); !problem.empty()) {
          fail("pair", "InvalidPair", problem);
        } else {
          slots[i].pair = std::move(pair);
        }
      } catch (const PipelineError& e) {
        if (e.kind() == PipelineErrorKind::llm_unavailable) {
          std::lock_guard lock(error_mutex);
          if (!fatal) fatal = std::current_exception();
          return;
        }
        fail(e.step(), to_string(e.kind()), e.what());
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
        return;
      }
    }
  };

  const int threads = std::max(1, std::min<int>(options.parallelism, static_cast<int>(stories.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  BuildResult result;
  for (auto& slot : slots) {
    if (slot.pair) result.pairs.push_back(std::move(*slot.pair));
    if (slot.failure) result.failures.push_back(std::move(*slot.failure));
  }
  result.manifest = dataset_stats(result.pairs);
  result.manifest.strategy = std::string(to_string(options.strategy));
  result.manifest.failures = result.failures.size();
  return result;
}

void write_dataset(const std::filesystem::path& dir, const BuildResult& result) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "pairs.jsonl", to_jsonl(result.pairs));
  write_file_atomic(dir / "manifest.json", to_json(result.manifest).dump(2) + "\n");
  std::string failures;
  for (const auto& f : result.failures) failures += f.dump() + "\n";
  write_file_atomic(dir / "failures.jsonl", failures);
}

std::vector<PreferencePair> ablate_dataset(const std::vector<PreferencePair>& pairs, Unit unit,
                                           const Pipeline& pipeline) {
  std::vector<PreferencePair> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    PreferencePair p = pair;
    p.frame_json = to_canonical_json(strip_unit(Json::parse(pair.frame_json), unit));
    p.prompt = pipeline.build_generation_prompt(p.frame_json);
    out.push_back(std::move(p));
  }
  return out;
}

SplitRatio parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("ratio must look like 9:1");
  try {
    std::size_t used = 0;
    const auto train = std::stoul(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("bad number");
    const auto rest = text.substr(colon + 1);
    const auto test = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("bad number");
    if (train + test == 0) throw std::invalid_argument("zero ratio");
    return {static_cast<unsigned>(train), static_cast<unsigned>(test)};
  } catch (const std::exception&) {
    throw std::invalid_argument("ratio must look like 9:1, got '" + text + "'");
  }
}

std::size_t train_size_for(std::size_t n, SplitRatio ratio) {
  const std::uint64_t parts = ratio.train + ratio.test;
  return static_cast<std::size_t>((2 * n * ratio.train + parts) / (2 * parts));
}

SplitResult split_dataset(const std::vector<PreferencePair>& pairs, SplitRatio ratio,
                          std::uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("nothing to split");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  auto below = [&](std::uint64_t bound) {
    // Largest multiple of bound that fits; draws above it are rejected.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do x = rng();
    while (x >= limit);
    return x % bound;
  };
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[below(i + 1)]);

  SplitResult result;
  const auto n_train = train_size_for(pairs.size(), ratio);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? result.train : result.test).push_back(pairs[order[k]]);
  }
  result.manifest = dataset_stats(pairs);
  result.manifest.train_size = result.train.size();
  result.manifest.test_size = result.test.size();
  result.manifest.seed = seed;
  return result;
}

DatasetManifest dataset_stats(const std::vector<PreferencePair>& pairs) {
  DatasetManifest m;
  m.total_pairs = pairs.size();

  std::map<std::string, std::size_t> emotional, action;
  std::map<std::string, std::size_t> strength{{"low", 0}, {"medium", 0}, {"high", 0}};
  std::map<std::string, std::size_t> importance{{"low", 0}, {"medium", 0}, {"high", 0}};
  std::set<std::string> variants;
  for (const auto& pair : pairs) {
    const Json doc = Json::parse(pair.frame_json, nullptr, false);
    if (doc.is_discarded()) continue;
    variants.insert(units_present(doc).variant_name());
    for (const auto& r : doc.value("relationships", Json::array())) {
      ++emotional[r.value("emotional_type", "")];
      ++action[r.value("action_type", "")];
      ++strength[r.value("relationship_strength", "")];
    }
    for (const auto& e : doc.value("events", Json::array())) ++importance[e.value("event_importance", "")];
  }
  if (variants.size() == 1) m.schema_variant = *variants.begin();
  else if (variants.size() > 1) m.schema_variant = "mixed";
  auto to_obj = [](const std::map<std::string, std::size_t>& counts) {
    Json out = Json::object();
    for (const auto& [k, v] : counts) out[k] = v;
    return out;
  };
  m.distributions = {{"emotional_type", to_obj(emotional)},
                     {"action_type", to_obj(action)},
                     {"relationship_strength", to_obj(strength)},
                     {"event_importance", to_obj(importance)}};

  auto score_block = [&](bool chosen) {
    Json block = Json::object();
    for (std::size_t d = 0; d < kDimensions.size(); ++d) {
      Json histogram = {{"1", 0}, {"2", 0}, {"3", 0}, {"4", 0}, {"5", 0}};
      double sum = 0, lo = 0, hi = 0;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double s = (chosen ? pairs[k].chosen_scores : pairs[k].rejected_scores)[d];
        sum += s;
        lo = k == 0 ? s : std::min(lo, s);
        hi = k == 0 ? s : std::max(hi, s);
        const auto bin = std::clamp<long>(std::lround(s), 1, 5);
        histogram[std::to_string(bin)] = histogram[std::to_string(bin)].get<std::size_t>() + 1;
      }
      const double mean = pairs.empty() ? 0 : sum / static_cast<double>(pairs.size());
      block[std::string(kDimensions[d])] = {
          {"mean", round2(mean)}, {"min", lo}, {"max", hi}, {"histogram", histogram}};
    }
    return block;
  };
  m.score_statistics = {{"chosen", score_block(true)}, {"rejected", score_block(false)}};

  auto length_block = [&](bool chosen) {
    std::vector<std::size_t> lengths;
    for (const auto& p : pairs) lengths.push_back(tokenize(chosen ? p.chosen : p.rejected).size());
    std::sort(lengths.begin(), lengths.end());
    Json histogram = Json::object();
    for (auto len : lengths) {
      const auto lo = len / 100 * 100;
      const auto key = std::to_string(lo) + "-" + std::to_string(lo + 99);
      histogram[key] = histogram.value(key, std::size_t{0}) + 1;
    }
    const double mean = lengths.empty() ? 0
                                        : std::accumulate(lengths.begin(), lengths.end(), 0.0) /
                                              static_cast<double>(lengths.size());
    return Json{{"min", lengths.empty() ? 0 : lengths.front()},
                {"max", lengths.empty() ? 0 : lengths.back()},
                {"mean", round2(mean)},
                {"median", lengths.empty() ? 0 : lengths[lengths.size() / 2]},
                {"histogram", histogram}};
  };
  m.story_length = {{"chosen", length_block(true)}, {"rejected", length_block(false)}};
  return m;
}

}  // namespace storyframe
