#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>

#include "storyframe/dataset.hpp"
#include "storyframe/digest.hpp"
#include "storyframe/harness.hpp"
#include "storyframe/io.hpp"
#include "storyframe/metrics.hpp"
#include "storyframe/service.hpp"

namespace storyframe::cli {

namespace {

namespace fs = std::filesystem;

// Raised for bad flag values and missing inputs; reported as UsageError.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string mock_script;
  std::string templates;
  int max_repairs = 3;
  std::optional<double> temperature;
  std::optional<std::int64_t> sampling_seed;
  std::vector<std::string> judge_endpoints;
  int parallelism_limit = 4;
  int timeout_ms = 60'000;
  int max_retries = 2;
};

struct Clients {
  std::shared_ptr<ChatClient> llm;
  std::vector<std::shared_ptr<ChatClient>> judges;
  std::shared_ptr<ChatClient> embed;

  ChatClient& require_llm() const {
    if (!llm) throw UsageError("no generation model: set LLM_BASE_URL or pass --mock-script");
    return *llm;
  }
  std::vector<ChatClient*> judge_ptrs() const {
    std::vector<ChatClient*> out;
    for (const auto& j : judges) out.push_back(j.get());
    return out;
  }
  std::vector<ChatClient*> require_judges() const {
    if (judges.empty()) {
      throw UsageError("no judge model: set JUDGE_BASE_URL, --judge-endpoint or --mock-script");
    }
    return judge_ptrs();
  }
};

ClientConfig tuned(ClientConfig config, const GlobalOptions& g) {
  config.timeout = std::chrono::milliseconds(g.timeout_ms);
  config.max_retries = g.max_retries;
  config.parallelism_limit = g.parallelism_limit;
  if (g.temperature) config.temperature = *g.temperature;
  config.validate();
  return config;
}

// A mock script is either one script shared by every role, or an object
// with "llm", "judges" (array) and "embed" scripts.
Clients make_clients(const GlobalOptions& g) {
  Clients c;
  if (!g.mock_script.empty()) {
    const auto script = Json::parse(read_file(g.mock_script));
    if (script.contains("llm") || script.contains("judges")) {
      if (script.contains("llm")) c.llm = ScriptedChatClient::from_json(script.at("llm"));
      for (const auto& j : script.value("judges", Json::array())) {
        c.judges.push_back(ScriptedChatClient::from_json(j));
      }
      if (script.contains("embed")) c.embed = ScriptedChatClient::from_json(script.at("embed"));
    } else {
      auto shared = ScriptedChatClient::from_json(script);
      c.llm = shared;
      c.judges.push_back(shared);
      c.embed = shared;
    }
    return c;
  }
  if (auto llm = ClientConfig::from_env("LLM")) {
    c.llm = std::make_shared<HttpChatClient>(tuned(*llm, g));
  }
  auto judge_base = ClientConfig::from_env("JUDGE");
  if (!g.judge_endpoints.empty()) {
    for (const auto& url : g.judge_endpoints) {
      ClientConfig config = judge_base.value_or(ClientConfig{});
      config.base_url = url;
      c.judges.push_back(std::make_shared<HttpChatClient>(tuned(config, g)));
    }
  } else if (judge_base) {
    c.judges.push_back(std::make_shared<HttpChatClient>(tuned(*judge_base, g)));
  }
  if (const char* url = std::getenv("EMBED_BASE_URL"); url && *url) {
    ClientConfig config;
    config.base_url = url;
    if (const char* key = std::getenv("EMBED_API_KEY")) config.api_key = key;
    if (const char* model = std::getenv("EMBED_MODEL")) config.embedding_model = model;
    c.embed = std::make_shared<HttpChatClient>(tuned(config, g));
  }
  return c;
}

Pipeline make_pipeline(const GlobalOptions& g) {
  PipelineOptions options;
  options.max_repairs = g.max_repairs;
  options.temperature = g.temperature;
  options.seed = g.sampling_seed;
  return Pipeline(g.templates.empty() ? TemplateSet::builtin() : TemplateSet::with_overrides(g.templates),
                  options);
}

Strategy strategy_from(const std::string& name) {
  if (auto s = parse_strategy(name)) return *s;
  throw UsageError("unknown strategy '" + name + "'");
}

void emit(std::ostream& out, const std::string& path, const std::string& bytes) {
  if (path.empty()) {
    out << bytes;
  } else {
    write_file_atomic(path, bytes);
  }
}

std::string pretty(const Json& doc) { return doc.dump(2) + "\n"; }

// A frame file that is either a full frame or an ablated document; returns
// its canonical bytes and the full frame when there is one.
std::pair<std::string, std::optional<StoryFrame>> load_frame_document(const std::string& path) {
  const auto bytes = read_file(path);
  Json doc;
  try {
    doc = Json::parse(bytes);
  } catch (const Json::parse_error&) {
    throw FrameParseError(validate_bytes(bytes, UnitSet::all()));
  }
  const auto units = units_present(doc);
  if (units == UnitSet::all()) {
    auto frame = from_json_document(doc);
    return {to_canonical_json(frame), frame};
  }
  const auto report = validate_document(doc, units);
  if (!report.ok()) throw FrameParseError(report);
  return {to_canonical_json(doc), std::nullopt};
}

std::vector<Json> load_gold(const std::string& path) {
  const auto text = read_file(path);
  std::vector<Json> gold;
  try {
    auto doc = Json::parse(text);
    if (doc.is_array()) return {doc.begin(), doc.end()};
    gold.push_back(std::move(doc));
    return gold;
  } catch (const Json::parse_error&) {
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    gold.push_back(Json::parse(line));
  }
  return gold;
}

std::vector<double> parse_sample(const std::string& path, const std::string& text) {
  const auto doc = Json::parse(text);
  if (!doc.is_array()) throw UsageError(path + ": expected a JSON array of numbers");
  std::vector<double> values;
  for (const auto& v : doc) {
    if (!v.is_number()) throw UsageError(path + ": expected a JSON array of numbers");
    values.push_back(v.get<double>());
  }
  return values;
}

Json rouge_json(const RougeScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

Json error_json(std::string_view code, const std::string& message) {
  return {{"error", code}, {"message", message}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"storyframe: structured story frames, generation, evaluation and datasets"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI/TOML file with option values");

  GlobalOptions g;
  app.add_option("--mock-script", g.mock_script, "Scripted mock replies (JSON) instead of HTTP models");
  app.add_option("--templates", g.templates, "Directory of .tmpl files overriding the built-ins");
  app.add_option("--max-repairs", g.max_repairs, "JSON repair attempts per step")->check(CLI::NonNegativeNumber);
  app.add_option("--temperature", g.temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
  app.add_option("--sampling-seed", g.sampling_seed, "Seed passed to the model backend");
  app.add_option("--judge-endpoint", g.judge_endpoints, "Judge base URL (repeatable)");
  app.add_option("--parallelism-limit", g.parallelism_limit, "Concurrent requests per client")
      ->check(CLI::PositiveNumber);
  app.add_option("--timeout-ms", g.timeout_ms, "Per-request timeout")->check(CLI::PositiveNumber);
  app.add_option("--max-retries", g.max_retries, "Retries on transport errors, 429 and 5xx")
      ->check(CLI::NonNegativeNumber);

  std::string input, output, strategy = "tidd_ec_chain", unit, ratio = "9:1", gold, frame_path;
  std::uint64_t seed = 0;
  int judge_runs = 3;
  int parallelism = 1;
  std::string transcript_path;

  auto* parse = app.add_subcommand("parse", "Parse a story into a frame");
  parse->add_option("--input", input, "Story text file")->required();
  parse->add_option("--output", output, "Frame JSON file (default stdout)");
  parse->add_option("--strategy", strategy, "zero_shot, tidd_ec, tidd_ec_cot or tidd_ec_chain");
  parse->add_option("--transcript", transcript_path, "Write the call transcript here");

  auto* generate = app.add_subcommand("generate", "Generate a story from a frame");
  generate->add_option("--input", input, "Frame JSON file (full or ablated)")->required();
  generate->add_option("--output", output, "Result JSON file (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Score a story on the seven-dimension rubric");
  evaluate->add_option("--input", input, "Story text file")->required();
  evaluate->add_option("--frame", frame_path, "Frame JSON the story was written from")->required();
  evaluate->add_option("--judge-runs", judge_runs, "Runs per judge")->check(CLI::PositiveNumber);
  evaluate->add_option("--output", output, "Report JSON file (default stdout)");

  auto* build = app.add_subcommand("build-dataset", "Build preference pairs from a story corpus");
  build->add_option("--input", input, "Corpus file or directory")->required();
  build->add_option("--output", output, "Output directory")->required();
  build->add_option("--strategy", strategy, "Parse strategy");
  build->add_option("--judge-runs", judge_runs, "Runs per judge")->check(CLI::PositiveNumber);
  build->add_option("--parallelism", parallelism, "Stories processed at once")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "Strip one unit from every pair");
  ablate->add_option("--input", input, "pairs.jsonl")->required();
  ablate->add_option("--unit", unit, "events, relationships, entities or outline")->required();
  ablate->add_option("--output", output, "Output JSONL (default stdout)");

  auto* split = app.add_subcommand("split", "Seeded train/test split");
  split->add_option("--input", input, "pairs.jsonl")->required();
  split->add_option("--output", output, "Output directory")->required();
  split->add_option("--ratio", ratio, "train:test, e.g. 9:1");
  split->add_option("--seed", seed, "Shuffle seed");

  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->add_option("--input", input, "pairs.jsonl")->required();
  stats->add_option("--output", output, "Manifest JSON file (default stdout)");

  std::string metric, reference, hypothesis, sample_a, sample_b;
  auto* metrics = app.add_subcommand("metrics", "Text, tree and rank-test metrics");
  metrics->add_option("--metric", metric,
                      "rouge_l, meteor, bertscore, tree_edit_distance or mann_whitney_u")
      ->required();
  metrics->add_option("--reference", reference, "Reference text (or JSON for tree_edit_distance)");
  metrics->add_option("--hypothesis", hypothesis, "Hypothesis text (or JSON for tree_edit_distance)");
  metrics->add_option("--sample-a", sample_a, "JSON array of numbers");
  metrics->add_option("--sample-b", sample_b, "JSON array of numbers");
  metrics->add_option("--output", output, "Report JSON file (default stdout)");

  auto* compare = app.add_subcommand("compare-strategies", "Tree edit distance of each strategy to gold");
  compare->add_option("--input", input, "Corpus file or directory")->required();
  compare->add_option("--gold", gold, "Gold frames: a JSON array, one document, or JSONL")->required();
  compare->add_option("--output", output, "Report JSON file (default stdout)");

  std::string host = "127.0.0.1", data_dir = "data";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--data-dir", data_dir, "Session storage directory");
  serve->add_option("--judge-runs", judge_runs, "Runs per judge")->check(CLI::PositiveNumber);

  auto* build_frame = app.add_subcommand("build-frame", "Apply builder ops, or validate a frame document");
  build_frame->add_option("--input", input, "JSON array of builder ops, or a frame document")->required();
  build_frame->add_option("--output", output, "Canonical frame JSON file (default stdout)");

  std::string variant;
  auto* schema = app.add_subcommand("schema", "Print or write the frame JSON schemas");
  schema->add_option("--variant", variant, "full, without_events, ... (default: all to --output)");
  schema->add_option("--output", output, "Directory for all variants, or file for one");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_json("UsageError", e.what()).dump() << "\n";
    return 2;
  }

  try {
    if (parse->parsed()) {
      const auto clients = make_clients(g);
      const auto pipeline = make_pipeline(g);
      const auto s = strategy_from(strategy);
      const auto story = read_file(input);
      try {
        const auto result = pipeline.run_parse_chain(story, s, clients.require_llm());
        if (!transcript_path.empty()) {
          write_file_atomic(transcript_path, pretty(to_json(result.state.transcript)));
        }
        emit(out, output, to_canonical_json(result.frame));
      } catch (const PipelineError& e) {
        if (!transcript_path.empty()) write_file_atomic(transcript_path, pretty(to_json(e.transcript())));
        throw;
      }
    } else if (generate->parsed()) {
      const auto clients = make_clients(g);
      const auto pipeline = make_pipeline(g);
      const auto [frame_json, frame] = load_frame_document(input);
      const auto result = frame ? pipeline.generate_story(*frame, clients.require_llm())
                                : pipeline.generate_from_json(frame_json, clients.require_llm());
      emit(out, output,
           pretty({{"story", result.story}, {"prompt", result.prompt}, {"transcript", to_json(result.transcript)}}));
    } else if (evaluate->parsed()) {
      const auto clients = make_clients(g);
      const auto pipeline = make_pipeline(g);
      const auto [frame_json, frame] = load_frame_document(frame_path);
      const auto report = judge_story(pipeline, read_file(input), frame_json, clients.require_judges(), judge_runs);
      emit(out, output, pretty(to_json(report)));
    } else if (build->parsed()) {
      const auto clients = make_clients(g);
      const auto pipeline = make_pipeline(g);
      BuildOptions options;
      options.strategy = strategy_from(strategy);
      options.judge_runs = judge_runs;
      options.parallelism = parallelism;
      BuildClients bc{&clients.require_llm(), &clients.require_llm(), clients.require_judges()};
      const auto result = build_dataset(ingest_corpus(input), pipeline, bc, options);
      write_dataset(output, result);
      out << pretty(to_json(result.manifest));
    } else if (ablate->parsed()) {
      const auto u = parse_unit(unit);
      if (!u) throw UsageError("unknown unit '" + unit + "'");
      const auto pairs = ablate_dataset(read_pairs(input), *u, make_pipeline(g));
      emit(out, output, to_jsonl(pairs));
    } else if (split->parsed()) {
      const auto result = split_dataset(read_pairs(input), parse_ratio(ratio), seed);
      fs::create_directories(output);
      write_file_atomic(fs::path(output) / "train.jsonl", to_jsonl(result.train));
      write_file_atomic(fs::path(output) / "test.jsonl", to_jsonl(result.test));
      write_file_atomic(fs::path(output) / "manifest.json", pretty(to_json(result.manifest)));
      out << pretty(to_json(result.manifest));
    } else if (stats->parsed()) {
      emit(out, output, pretty(to_json(dataset_stats(read_pairs(input)))));
    } else if (metrics->parsed()) {
      Json report = {{"metric", metric}};
      auto need = [](const std::string& value, const char* flag) {
        if (value.empty()) throw UsageError(std::string(flag) + " is required for this metric");
        return read_file(value);
      };
      if (metric == "rouge_l" || metric == "meteor" || metric == "bertscore") {
        const auto ref = need(reference, "--reference");
        const auto hyp = need(hypothesis, "--hypothesis");
        report["inputs_digest"] = sha256_hex(ref + '\0' + hyp);
        if (metric == "rouge_l") {
          report["value"] = rouge_json(rouge_l(tokenize(ref), tokenize(hyp)));
        } else if (metric == "meteor") {
          const auto d = meteor_detail(tokenize(ref), tokenize(hyp));
          report["value"] = {{"score", d.score},     {"precision", d.precision}, {"recall", d.recall},
                             {"fmean", d.fmean},     {"penalty", d.penalty},     {"matches", d.matches},
                             {"chunks", d.chunks},   {"exact_search", d.exact_search}};
        } else {
          report["value"] = rouge_json(bertscore(ref, hyp, make_clients(g).embed.get()));
        }
      } else if (metric == "tree_edit_distance") {
        const auto a = need(reference, "--reference");
        const auto b = need(hypothesis, "--hypothesis");
        report["inputs_digest"] = sha256_hex(a + '\0' + b);
        report["value"] = tree_edit_distance(json_to_tree(Json::parse(a)), json_to_tree(Json::parse(b)));
      } else if (metric == "mann_whitney_u") {
        const auto a = need(sample_a, "--sample-a");
        const auto b = need(sample_b, "--sample-b");
        report["inputs_digest"] = sha256_hex(a + '\0' + b);
        const auto r = mann_whitney_u(parse_sample(sample_a, a), parse_sample(sample_b, b));
        report["value"] = {{"u_statistic", r.u_statistic},
                           {"p_value", r.p_value},
                           {"method", to_string(r.method)},
                           {"degenerate", r.degenerate}};
      } else {
        throw UsageError("unknown metric '" + metric + "'");
      }
      emit(out, output, pretty(report));
    } else if (compare->parsed()) {
      const auto clients = make_clients(g);
      const auto results = compare_strategies(ingest_corpus(input), load_gold(gold), make_pipeline(g),
                                              clients.require_llm());
      emit(out, output, pretty(to_json(results)));
    } else if (serve->parsed()) {
      const auto clients = make_clients(g);
      const auto pipeline = make_pipeline(g);
      SessionStore store(data_dir);
      StoryService service(store, pipeline, {clients.llm.get(), clients.judge_ptrs()}, judge_runs);
      HttpFrontend frontend(service);
      err << Json{{"event", "listening"}, {"host", host}, {"port", port}}.dump() << "\n";
      frontend.listen(host, port);
    } else if (build_frame->parsed()) {
      const auto doc = Json::parse(read_file(input));
      if (!doc.is_array()) {
        emit(out, output, to_canonical_json(from_json_document(doc)));
      } else {
        FrameBuilder builder;
        for (std::size_t i = 0; i < doc.size(); ++i) {
          try {
            apply_builder_op(builder, doc[i]);
          } catch (const BuilderError& e) {
            auto body = error_json(to_string(e.code()), e.what());
            body["subjects"] = e.subjects();
            body["op_index"] = i;
            err << body.dump() << "\n";
            return 1;
          }
        }
        try {
          emit(out, output, to_canonical_json(builder.commit()));
        } catch (const ValidationFailed& e) {
          throw FrameParseError(e.report());
        }
      }
    } else if (schema->parsed()) {
      if (variant.empty()) {
        if (output.empty()) throw UsageError("--output directory is required without --variant");
        fs::create_directories(output);
        for (const char* name : {"full", "without_entities", "without_events", "without_relationships",
                                 "without_outline"}) {
          const auto units = *UnitSet::from_variant_name(name);
          write_file_atomic(fs::path(output) / (std::string(name) + ".schema.json"),
                            pretty(frame_json_schema(units)));
        }
      } else {
        const auto units = UnitSet::from_variant_name(variant);
        if (!units) throw UsageError("unknown schema variant '" + variant + "'");
        emit(out, output, pretty(frame_json_schema(*units)));
      }
    }
    return 0;
  } catch (const UsageError& e) {
    err << error_json("UsageError", e.what()).dump() << "\n";
    return 2;
  } catch (const FrameParseError& e) {
    auto body = error_json("ValidationFailed", e.what());
    body["violations"] = to_json(e.report())["violations"];
    err << body.dump() << "\n";
  } catch (const PipelineError& e) {
    auto body = error_json(to_string(e.kind()), e.what());
    body["step"] = e.step();
    body["attempts"] = e.attempts();
    err << body.dump() << "\n";
  } catch (const LlmError& e) {
    auto body = error_json(to_string(e.kind()), e.what());
    body["attempt_log"] = e.attempt_log();
    err << body.dump() << "\n";
  } catch (const IoError& e) {
    err << error_json("IoError", e.what()).dump() << "\n";
  } catch (const EmptyCorpus& e) {
    err << error_json("EmptyCorpus", e.what()).dump() << "\n";
  } catch (const InvalidPair& e) {
    err << error_json("InvalidPair", e.what()).dump() << "\n";
  } catch (const FeatureDisabled& e) {
    err << error_json("FeatureDisabled", e.what()).dump() << "\n";
  } catch (const Json::exception& e) {
    err << error_json("MalformedJson", e.what()).dump() << "\n";
  } catch (const std::exception& e) {
    err << error_json("Error", e.what()).dump() << "\n";
  }
  return 1;
}

}  // namespace storyframe::cli
