// Acceptance gate: one PASS/FAIL line per primary criterion. Exits non-zero
// when any criterion fails.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "suites.hpp"
#include "storyframe/dataset.hpp"
#include "storyframe/harness.hpp"
#include "storyframe/metrics.hpp"
#include "storyframe/service.hpp"

namespace sf = storyframe;
using sf::Json;

namespace {

// Pinned tolerances and budgets.
constexpr double kExactPTolerance = 1e-9;
constexpr double kNormalPTolerance = 0.01;
constexpr double kMetricBudgetSeconds = 60.0;
constexpr double kServiceBudgetSeconds = 10.0;
constexpr int kRougeCases = 200;
constexpr int kTreeCases = 200;
constexpr std::size_t kTreeMaxNodes = 6;
constexpr std::size_t kExactMaxSample = 6;
constexpr std::size_t kNormalSample = 8;
constexpr int kMutationCases = 100;
constexpr std::size_t kFuzzOps = 10'000;
constexpr std::size_t kSplitPairs = 9851;
constexpr std::size_t kExpectedTrain = 8866;
constexpr std::size_t kExpectedTest = 985;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string scores_json(int v) {
  Json doc = Json::object();
  for (auto d : sf::kDimensions) doc[std::string(d)] = v;
  return doc.dump();
}

void metric_oracles(Check& c) {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);

  int rouge_ok = 0;
  for (int i = 0; i < kRougeCases; ++i) {
    const auto a = sf::oracle::random_tokens(rng, 1 + rng() % 14, 5);
    const auto b = sf::oracle::random_tokens(rng, 1 + rng() % 14, 5);
    const auto lcs = sf::oracle::brute_lcs(a, b);
    const auto s = sf::rouge_l(a, b);
    const double p = double(lcs) / double(b.size()), r = double(lcs) / double(a.size());
    const double f = lcs == 0 ? 0.0 : 2 * p * r / (p + r);
    if (sf::lcs_length(a, b) == lcs && s.precision == p && s.recall == r && std::abs(s.f1 - f) <= 1e-15) ++rouge_ok;
  }
  c.require(rouge_ok == kRougeCases, "rouge_l matched " + std::to_string(rouge_ok) + "/200 brute-force cases");
  c.note("rouge_l " + std::to_string(rouge_ok) + "/" + std::to_string(kRougeCases));

  int tree_ok = 0;
  for (int i = 0; i < kTreeCases; ++i) {
    const auto a = sf::oracle::random_tree(rng, 1 + rng() % kTreeMaxNodes, "abc");
    const auto b = sf::oracle::random_tree(rng, 1 + rng() % kTreeMaxNodes, "abc");
    if (sf::tree_edit_distance(a, b) == sf::oracle::mapping_tree_distance(a, b)) ++tree_ok;
  }
  c.require(tree_ok == kTreeCases, "tree_edit_distance matched " + std::to_string(tree_ok) + "/200 oracle cases");
  c.note("tree_edit_distance " + std::to_string(tree_ok) + "/" + std::to_string(kTreeCases));

  // Every tie-free labeling for n, m <= 6 goes through mann_whitney_u itself.
  double max_exact = 0;
  std::size_t exact_cases = 0;
  bool exact_method = true;
  for (std::size_t n = 1; n <= kExactMaxSample; ++n) {
    for (std::size_t m = 1; m <= kExactMaxSample; ++m) {
      for (const auto& ranks : sf::oracle::rank_subsets(n, m)) {
        std::vector<double> b;
        for (std::size_t r = 1; r <= n + m; ++r) {
          if (std::find(ranks.begin(), ranks.end(), double(r)) == ranks.end()) b.push_back(double(r));
        }
        const auto result = sf::mann_whitney_u(ranks, b);
        exact_method = exact_method && result.method == sf::UTestMethod::exact;
        max_exact = std::max(max_exact,
                             std::abs(result.p_value - sf::oracle::enumerated_utest_p(n, m, result.u_statistic)));
        ++exact_cases;
      }
    }
  }
  c.require(exact_method, "mann_whitney_u did not pick the exact method for small tie-free samples");
  c.require(max_exact <= kExactPTolerance, "exact p max |dp| " + fmt(max_exact) + " > 1e-9");
  c.note("exact p over " + std::to_string(exact_cases) + " samples, max |dp| " + fmt(max_exact, 3));

  // Normal approximation against the exact p for every U at n = m = 8.
  double max_normal = 0, worst_u = 0;
  const std::size_t n = kNormalSample;
  for (std::size_t u = 0; u <= n * n; ++u) {
    // Sample a gets ranks whose U equals u: shift the top ranks of a down.
    std::vector<double> a, b;
    std::size_t remaining = u;
    std::vector<std::size_t> shift(n, 0);
    for (std::size_t k = n; k-- > 0 && remaining > 0;) {
      shift[k] = std::min<std::size_t>(n, remaining);
      remaining -= shift[k];
    }
    std::vector<bool> in_a(2 * n, false);
    for (std::size_t k = 0; k < n; ++k) in_a[k + shift[k]] = true;
    for (std::size_t r = 0; r < 2 * n; ++r) (in_a[r] ? a : b).push_back(double(r + 1));
    const auto approx = sf::mann_whitney_u(a, b, sf::UTestMethod::normal_approx);
    const double exact = sf::oracle::enumerated_utest_p(n, n, approx.u_statistic);
    if (approx.u_statistic != double(u)) c.require(false, "U construction failed at u=" + std::to_string(u));
    const double d = std::abs(approx.p_value - exact);
    if (d > max_normal) {
      max_normal = d;
      worst_u = double(u);
    }
  }
  c.require(max_normal <= kNormalPTolerance,
            "normal-approx p at n=m=8 max |dp| " + fmt(max_normal, 5) + " at U=" + fmt(worst_u) + " exceeds 0.01");
  c.note("normal p at n=m=8 max |dp| " + fmt(max_normal, 5));

  const double elapsed = seconds_since(start);
  c.require(elapsed < kMetricBudgetSeconds, "metric oracles took " + fmt(elapsed, 3) + " s");
  c.note(fmt(elapsed, 3) + " s");
}

void schema_graph(Check& c) {
  const auto patterns = sf::suites::interaction_patterns();
  c.require(patterns.size() == 9, "expected 9 interaction patterns, have " + std::to_string(patterns.size()));
  for (const auto& p : patterns) {
    const auto problem = sf::suites::check_pattern(p);
    c.require(problem.empty(), "pattern " + p.name + ": " + problem);
  }
  c.note(std::to_string(patterns.size()) + " patterns");

  const auto mutations = sf::suites::run_mutation_suite(Json::parse(sf::fixtures::golden_bytes()), kMutationCases, 20240601);
  c.require(mutations.cases == kMutationCases && mutations.caught == kMutationCases,
            "mutations caught " + std::to_string(mutations.caught) + "/" + std::to_string(mutations.cases));
  for (const auto& m : mutations.misses) c.require(false, m);
  c.note("mutations " + std::to_string(mutations.caught) + "/" + std::to_string(mutations.cases));

  const auto fuzz = sf::suites::fuzz_builder(kFuzzOps, 20240601);
  c.require(fuzz.ops == kFuzzOps, "fuzz ran " + std::to_string(fuzz.ops) + " ops");
  c.require(fuzz.problems.empty(), "fuzz invariant breaches: " + std::to_string(fuzz.problems.size()));
  for (std::size_t i = 0; i < std::min<std::size_t>(3, fuzz.problems.size()); ++i) c.require(false, fuzz.problems[i]);
  c.note("fuzz " + std::to_string(fuzz.ops) + " ops, " + std::to_string(fuzz.commits) + " commits, " +
         std::to_string(fuzz.failed_commits) + " refused commits");
}

std::shared_ptr<sf::ScriptedChatClient> dataset_client() {
  return sf::ScriptedChatClient::from_json(sf::fixtures::read_json("mock_dataset.json"));
}

void pipeline_determinism(Check& c) {
  const auto corpus = sf::split_corpus_text(sf::fixtures::read("fixture_corpus.txt"));
  c.require(corpus.size() == 20, "fixture corpus has " + std::to_string(corpus.size()) + " stories");
  const sf::Pipeline pipeline;

  auto parse_once = [&] {
    auto client = dataset_client();
    return pipeline.run_parse_chain(corpus.front(), sf::Strategy::tidd_ec_chain, *client);
  };
  const auto p1 = parse_once(), p2 = parse_once();
  c.require(sf::to_canonical_json(p1.frame) == sf::to_canonical_json(p2.frame) &&
                sf::to_json(p1.state.transcript).dump() == sf::to_json(p2.state.transcript).dump(),
            "run_parse_chain differs across runs");

  const std::vector<std::string> order{"parse_entities", "parse_events", "parse_outline", "parse_relationships"};
  const auto& t = p1.state.transcript;
  bool ordered = t.size() == order.size();
  for (std::size_t i = 0; ordered && i < t.size(); ++i) {
    ordered = t[i].step == order[i];
    for (std::size_t k = 0; ordered && k < i; ++k) {
      const auto& [name, fragment] = p1.state.step_results[k];
      ordered = t[i].prompt.find(Json{{name, fragment}}.dump(2)) != std::string::npos;
    }
  }
  c.require(ordered, "chain transcript is out of order or lacks prior results");

  auto generate_once = [&] {
    auto client = dataset_client();
    return pipeline.generate_story(p1.frame, *client);
  };
  const auto g1 = generate_once(), g2 = generate_once();
  c.require(g1.story == g2.story && g1.prompt == g2.prompt, "generate_story differs across runs");

  auto pair_once = [&] {
    auto client = dataset_client();
    return sf::to_json(sf::build_pair(pipeline, corpus.front(), {client.get(), client.get(), {client.get()}})).dump();
  };
  c.require(pair_once() == pair_once(), "build_pair differs across runs");

  auto dataset_once = [&] {
    auto client = dataset_client();
    return sf::build_dataset(corpus, pipeline, {client.get(), client.get(), {client.get()}});
  };
  const auto d1 = dataset_once(), d2 = dataset_once();
  const auto j1 = sf::to_jsonl(d1.pairs), j2 = sf::to_jsonl(d2.pairs);
  c.require(d1.pairs.size() == 20, "dataset build produced " + std::to_string(d1.pairs.size()) + " pairs");
  c.require(j1 == j2, "dataset JSONL differs across runs");
  c.require(sf::to_json(d1.manifest).dump() == sf::to_json(d2.manifest).dump(), "manifest differs across runs");
  c.note(std::to_string(d1.pairs.size()) + " pairs, " + std::to_string(j1.size()) + " bytes identical");
}

void dataset_arithmetic(Check& c) {
  auto client = dataset_client();
  const sf::Pipeline pipeline;
  const auto corpus = sf::split_corpus_text(sf::fixtures::read("fixture_corpus.txt"));
  const auto built = sf::build_dataset(corpus, pipeline, {client.get(), client.get(), {client.get()}});

  std::vector<sf::PreferencePair> synthetic;
  for (std::size_t i = 0; i < kSplitPairs; ++i) {
    auto p = built.pairs[i % built.pairs.size()];
    p.pair_id = "pair_" + std::to_string(i);
    synthetic.push_back(std::move(p));
  }
  const auto split = sf::split_dataset(synthetic, {9, 1}, 20240601);
  c.require(split.train.size() == kExpectedTrain && split.test.size() == kExpectedTest,
            "split gave " + std::to_string(split.train.size()) + "/" + std::to_string(split.test.size()));
  c.note("split " + std::to_string(split.train.size()) + "/" + std::to_string(split.test.size()));

  std::size_t variants = 0;
  for (sf::Unit u : sf::kUnits) {
    for (const auto& p : sf::ablate_dataset(built.pairs, u, pipeline)) {
      const auto doc = Json::parse(p.frame_json);
      const auto report = sf::validate_document(doc, sf::UnitSet::without(u));
      c.require(report.ok() && !doc.contains(std::string(sf::to_string(u))),
                "ablated " + std::string(sf::to_string(u)) + " pair " + p.pair_id + " fails its schema");
      c.require(sf::check_pair(p).empty(), "ablated pair " + p.pair_id + ": " + sf::check_pair(p));
      ++variants;
    }
  }
  c.note(std::to_string(variants) + " ablated pairs validate");

  for (const auto& p : built.pairs) {
    c.require(sf::mean_score(p.chosen_scores) >= sf::mean_score(p.rejected_scores),
              "pair " + p.pair_id + " has chosen mean below rejected mean");
  }
  c.note("chosen >= rejected on " + std::to_string(built.pairs.size()) + " pairs");
}

void strategy_harness(Check& c) {
  auto client = sf::ScriptedChatClient::from_json(sf::fixtures::read_json("mock_strategies.json"));
  const auto corpus = sf::split_corpus_text(sf::fixtures::read("fixture_corpus.txt"));
  const std::vector<std::string> stories(corpus.begin(), corpus.begin() + 5);
  const std::vector<Json> gold(stories.size(), Json::parse(sf::fixtures::golden_bytes()));
  const auto results = sf::compare_strategies(stories, gold, sf::Pipeline(), *client);
  double chain = -1, zero = -1;
  std::string line;
  for (const auto& r : results) {
    const auto q = sf::quartiles(r.distances);
    if (r.strategy == sf::Strategy::tidd_ec_chain) chain = q.median;
    if (r.strategy == sf::Strategy::zero_shot) zero = q.median;
    line += std::string(sf::to_string(r.strategy)) + "=" + fmt(q.median) + " ";
  }
  c.require(chain == 0.0, "chain median " + fmt(chain) + " is not 0");
  c.require(zero > 0.0, "zero-shot median " + fmt(zero) + " is not above 0");
  c.note("medians " + line);
}

void judge_aggregation(Check& c) {
  const sf::Pipeline pipeline;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> score(1, 5);
  for (int trial = 0; trial < 20; ++trial) {
    sf::ScriptedChatClient judge;
    judge.add_rule({"Revision suggestion:", {sf::ScriptedReply::text("More dialogue.")}, true});
    std::array<std::vector<int>, 7> raw;
    for (int run = 0; run < 3; ++run) {
      Json doc = Json::object();
      for (std::size_t d = 0; d < 7; ++d) {
        raw[d].push_back(score(rng));
        doc[std::string(sf::kDimensions[d])] = raw[d].back();
      }
      judge.push(sf::ScriptedReply::text(doc.dump()));
    }
    const auto report = sf::judge_story(pipeline, "A story.", sf::fixtures::golden_bytes(), {&judge}, 3);
    for (std::size_t d = 0; d < 7; ++d) {
      const double mean = (raw[d][0] + raw[d][1] + raw[d][2]) / 3.0;
      const double expected = std::round(mean * 100.0) / 100.0;
      c.require(std::abs(report.dimensions[d] - expected) < 1e-9 && report.raw_runs[d] == raw[d],
                "dimension " + std::string(sf::kDimensions[d]) + " reports " + fmt(report.dimensions[d]) +
                    ", mean of runs is " + fmt(expected));
    }
  }
  c.note("20 trials of 3 runs");

  sf::ScriptedChatClient judge;
  judge.add_rule({"Revision suggestion:", {sf::ScriptedReply::text("More dialogue.")}, true});
  Json bad = Json::parse(scores_json(4));
  bad["readability"] = 6;
  judge.push(sf::ScriptedReply::text(bad.dump()));
  for (int i = 0; i < 3; ++i) judge.push(sf::ScriptedReply::text(scores_json(4)));
  const auto report = sf::judge_story(pipeline, "A story.", "{}", {&judge}, 3);
  const bool repaired = report.transcript.size() >= 2 && !report.transcript[0].error.empty() &&
                        report.transcript[1].attempt == 1 && report.dimension("readability") == 4.0;
  c.require(repaired, "out-of-range score did not trigger a repair");
  c.note("out-of-range score repaired");
}

void service_end_to_end(Check& c) {
  const auto start = Clock::now();
  auto generator = std::make_shared<sf::ScriptedChatClient>();
  generator->add_rule({"Story generation:",
                       {sf::ScriptedReply::text("On the basketball court Jack shoved Ryan. By the afternoon he said sorry.")},
                       true});
  sf::ScriptedChatClient judge;
  judge.add_rule({"Revision suggestion:", {sf::ScriptedReply::text("Show Ryan's side.")}, true});
  judge.add_rule({"Story evaluation:", {sf::ScriptedReply::text(scores_json(4))}, true});

  sf::SessionStore store(sf::fixtures::scratch("acceptance_service"));
  const sf::Pipeline pipeline;
  sf::StoryService service(store, pipeline, {generator.get(), {&judge}}, 3);
  sf::HttpFrontend frontend(service);
  const int port = frontend.start("127.0.0.1", 0);
  httplib::Client http("127.0.0.1", port);
  http.set_read_timeout(10, 0);

  auto created = http.Post("/frames", Json{{"ops", sf::fixtures::picture_ops()}}.dump(), "application/json");
  c.require(created && created->status == 201, "POST /frames failed");
  if (created && created->status == 201) {
    const auto body = Json::parse(created->body);
    const std::string id = body["frame_id"];
    const auto& frame = body["frame"];
    c.require(frame["entities"].size() == 3 && frame["events"].size() == 4 && frame["relationships"].size() == 4,
              "created frame does not have 3 entities, 4 events, 4 relationships");
    std::size_t staged = 0;
    for (const auto& [stage, ids] : frame["outline"]["story_structure"].items()) staged += ids.size();
    c.require(staged == 4, "outline does not place every event");

    auto generated = http.Post(("/frames/" + id + "/generate").c_str(), "{}", "application/json");
    c.require(generated && generated->status == 200, "POST generate failed");
    if (generated && generated->status == 200) {
      const auto g = Json::parse(generated->body);
      c.require(!g["story"].get<std::string>().empty(), "empty story");
      c.require(g["report"].is_object() && g["report"]["dimensions"].size() == 7, "report lacks seven dimensions");
    }
    auto exported = http.Get(("/frames/" + id + "/export").c_str());
    c.require(exported && exported->status == 200, "GET export failed");
    if (exported && exported->status == 200) {
      const auto x = Json::parse(exported->body);
      c.require(x["frame_json"] == sf::fixtures::golden_bytes(), "exported frame JSON differs from the golden file");
      c.require(x["report"]["dimensions"].size() == 7, "export lacks the report");
    }
  }
  frontend.stop();
  const double elapsed = seconds_since(start);
  c.require(elapsed < kServiceBudgetSeconds, "service workflow took " + fmt(elapsed, 3) + " s");
  c.note(fmt(elapsed, 3) + " s");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"metric-oracles", metric_oracles},
      {"schema-graph-suite", schema_graph},
      {"pipeline-determinism", pipeline_determinism},
      {"dataset-arithmetic", dataset_arithmetic},
      {"strategy-harness", strategy_harness},
      {"judge-aggregation", judge_aggregation},
      {"service-end-to-end", service_end_to_end},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    std::string notes;
    for (const auto& n : c.notes) notes += (notes.empty() ? "" : "; ") + n;
    if (c.failures.empty()) {
      std::cout << "PASS " << name << " (" << notes << ")\n";
    } else {
      ++failed;
      std::cout << "FAIL " << name << " (" << notes << ")\n";
      for (const auto& f : c.failures) std::cout << "    " << f << "\n";
    }
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
