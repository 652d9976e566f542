#include "storyframe/prompt_pipeline.hpp"

#include <cctype>

namespace storyframe {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::zero_shot: return "zero_shot";
    case Strategy::tidd_ec: return "tidd_ec";
    case Strategy::tidd_ec_cot: return "tidd_ec_cot";
    case Strategy::tidd_ec_chain: return "tidd_ec_chain";
  }
  return "tidd_ec_chain";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  for (Strategy s : kStrategies) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(PipelineErrorKind kind) {
  switch (kind) {
    case PipelineErrorKind::llm_unavailable: return "LlmUnavailable";
    case PipelineErrorKind::repair_exhausted: return "RepairExhausted";
    case PipelineErrorKind::validation_failed: return "ValidationFailed";
    case PipelineErrorKind::empty_generation: return "EmptyGeneration";
  }
  return "LlmUnavailable";
}

Json to_json(const Transcript& transcript) {
  Json out = Json::array();
  for (const auto& e : transcript) {
    out.push_back({{"step", e.step},
                   {"attempt", e.attempt},
                   {"prompt", e.prompt},
                   {"response", e.response},
                   {"error", e.error}});
  }
  return out;
}

PipelineError::PipelineError(PipelineErrorKind kind, std::string step, std::string message,
                             Transcript transcript, ValidationReport report)
    : std::runtime_error(std::string(to_string(kind)) + " (" + step + "): " + message),
      kind_(kind),
      step_(std::move(step)),
      transcript_(std::move(transcript)),
      report_(std::move(report)) {}

int PipelineError::attempts() const {
  int n = 0;
  for (const auto& e : transcript_) n += e.step == step_;
  return n;
}

namespace {

std::optional<Json> try_parse(std::string_view text) {
  Json value = Json::parse(text.begin(), text.end(), nullptr, false);
  if (value.is_discarded()) return std::nullopt;
  return value;
}

// End (exclusive) of the balanced value starting at `start`, honoring
// strings and escapes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') ++depth;
    else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::string fragment_key(Unit step) { return std::string(to_string(step)); }

std::string step_name(Unit step) { return "parse_" + fragment_key(step); }

Json assemble(const std::vector<std::pair<std::string, Json>>& results) {
  Json doc = Json::object();
  for (Unit u : kUnits) {
    for (const auto& [name, fragment] : results) {
      if (name == to_string(u)) doc[name] = fragment;
    }
  }
  return doc;
}

}  // namespace

std::optional<Json> extract_json(std::string_view raw) {
  if (auto whole = try_parse(raw); whole && (whole->is_object() || whole->is_array())) {
    return whole;
  }
  if (auto fence = raw.find("```"); fence != std::string_view::npos) {
    auto body_start = fence + 3;
    while (body_start < raw.size() && std::isalpha(static_cast<unsigned char>(raw[body_start]))) {
      ++body_start;
    }
    const auto close = raw.find("```", body_start);
    if (close != std::string_view::npos) {
      if (auto inner = try_parse(raw.substr(body_start, close - body_start))) return inner;
    }
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '{' && raw[i] != '[') continue;
    if (auto end = balanced_end(raw, i)) {
      if (auto value = try_parse(raw.substr(i, *end - i))) return value;
    }
  }
  return std::nullopt;
}

Pipeline::Pipeline(TemplateSet templates, PipelineOptions options)
    : templates_(std::move(templates)), options_(options) {
  if (options_.max_repairs < 0) throw std::invalid_argument("max_repairs must be non-negative");
}

std::string Pipeline::chain_step_prompt(Unit step, const std::string& story,
                                        const std::vector<std::pair<std::string, Json>>& prior) const {
  std::string prior_text;
  for (const auto& [name, fragment] : prior) {
    if (!prior_text.empty()) prior_text += "\n\n";
    prior_text += Json{{name, fragment}}.dump(2);
  }
  if (prior_text.empty()) prior_text = "(none)";
  const auto& tmpl = templates_.get(step_name(step));
  return render_prompt(make_tidd_ec(tmpl, {{"story", story}, {"prior_results", prior_text}}));
}

std::string Pipeline::single_shot_prompt(Strategy strategy, const std::string& story) const {
  const Vars vars{{"story", story}};
  switch (strategy) {
    case Strategy::zero_shot: {
      auto text = substitute(templates_.get("zero_shot").section("TEXT"), vars);
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw EmptySection("content");
      return text + "\n";
    }
    case Strategy::tidd_ec:
      return render_prompt(make_tidd_ec(templates_.get("parse_frame"), vars));
    case Strategy::tidd_ec_cot: {
      auto prompt = make_tidd_ec(templates_.get("parse_frame"), vars);
      auto extra = make_tidd_ec(templates_.get("cot"), vars);
      prompt.instruction.insert(prompt.instruction.end(), extra.instruction.begin(),
                                extra.instruction.end());
      return render_prompt(prompt);
    }
    case Strategy::tidd_ec_chain:
      break;
  }
  throw std::invalid_argument("the chain strategy has no single-shot prompt");
}

std::string Pipeline::call(ChatClient& client, const std::string& step, const std::string& prompt,
                           int attempt, Transcript& transcript) const {
  ChatRequest request;
  request.messages.push_back({Role::user, prompt});
  request.temperature = options_.temperature;
  request.seed = options_.seed;
  try {
    auto response = client.chat(request);
    transcript.push_back({step, attempt, prompt, response.content, ""});
    return response.content;
  } catch (const LlmError& e) {
    transcript.push_back({step, attempt, prompt, "", e.what()});
    throw PipelineError(PipelineErrorKind::llm_unavailable, step, e.what(), transcript);
  }
}

Json Pipeline::repair_json(ChatClient& client, const std::string& step, const std::string& prompt,
                           std::string raw, const JsonCheck& check, Transcript& transcript) const {
  const auto& repair = templates_.get("repair").section("TEXT");
  for (int attempt = 0;; ++attempt) {
    std::string error;
    auto value = extract_json(raw);
    if (!value) {
      error = "the reply contains no parseable JSON value";
    } else {
      error = check(*value);
    }
    if (!transcript.empty()) transcript.back().error = error;
    if (error.empty()) return *value;
    if (attempt >= options_.max_repairs) {
      throw PipelineError(PipelineErrorKind::repair_exhausted, step,
                          "no acceptable JSON after " + std::to_string(attempt + 1) + " attempt(s): " + error,
                          transcript);
    }
    const auto repair_prompt =
        prompt + "\n" + substitute(repair, {{"error", error}, {"previous_response", raw}}) + "\n";
    raw = call(client, step, repair_prompt, attempt + 1, transcript);
  }
}

Json Pipeline::request_json(ChatClient& client, const std::string& step, const std::string& prompt,
                            const JsonCheck& check, Transcript& transcript) const {
  auto raw = call(client, step, prompt, 0, transcript);
  return repair_json(client, step, prompt, std::move(raw), check, transcript);
}

ParseResult Pipeline::run_parse_chain(const std::string& story, Strategy strategy,
                                      ChatClient& client) const {
  if (story.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw std::invalid_argument("story text is empty");
  }
  ParseResult result;
  auto& state = result.state;
  state.story_text = story;

  if (strategy == Strategy::tidd_ec_chain) {
    UnitSet done;
    for (Unit step : kChainSteps) {
      const auto key = fragment_key(step);
      const UnitSet expected = done.insert(step);
      JsonCheck check = [&](const Json& value) -> std::string {
        if (!value.is_object() || !value.contains(key) || value.size() != 1) {
          return "expected a JSON object with the single key \"" + key + "\"";
        }
        auto results = state.step_results;
        results.emplace_back(key, value.at(key));
        auto report = validate_document(assemble(results), expected);
        return report.ok() ? "" : report.summary();
      };
      const auto prompt = chain_step_prompt(step, story, state.step_results);
      auto value = request_json(client, step_name(step), prompt, check, state.transcript);
      state.step_results.emplace_back(key, value.at(key));
      done = expected;
    }
  } else {
    JsonCheck check = [](const Json& value) -> std::string {
      auto report = validate_document(value, UnitSet::all());
      return report.ok() ? "" : report.summary();
    };
    const auto prompt = single_shot_prompt(strategy, story);
    auto value = request_json(client, "parse_frame", prompt, check, state.transcript);
    for (Unit u : kUnits) state.step_results.emplace_back(fragment_key(u), value.at(fragment_key(u)));
  }

  const Json doc = assemble(state.step_results);
  auto report = validate_document(doc, UnitSet::all());
  if (!report.ok()) {
    throw PipelineError(PipelineErrorKind::validation_failed, "frame", report.summary(),
                        state.transcript, report);
  }
  result.frame = decode_frame_unvalidated(doc);
  return result;
}

std::string Pipeline::build_generation_prompt(const std::string& frame_json) const {
  return render_prompt(make_tidd_ec(templates_.get("generate"), {{"frame_json", frame_json}}));
}

std::string Pipeline::build_regeneration_prompt(const std::string& frame_json,
                                                const std::string& previous_story,
                                                const std::string& suggestion) const {
  const auto& tmpl = templates_.get("regenerate");
  const Vars vars{{"previous_story", previous_story}, {"suggestion", suggestion}};
  auto prompt = build_generation_prompt(frame_json);
  prompt += "\n" + substitute(tmpl.section("PREVIOUS"), vars) + "\n";
  if (suggestion.find_first_not_of(" \t\r\n") != std::string::npos) {
    prompt += "\n" + substitute(tmpl.section("SUGGESTION"), vars) + "\n";
  }
  return prompt;
}

GenerationResult Pipeline::complete_story(const std::string& prompt, const std::string& step,
                                          ChatClient& client) const {
  GenerationResult result;
  result.prompt = prompt;
  result.story = call(client, step, prompt, 0, result.transcript);
  if (result.story.find_first_not_of(" \t\r\n") == std::string::npos) {
    result.transcript.back().error = "empty generation";
    throw PipelineError(PipelineErrorKind::empty_generation, step, "the model returned no text",
                        result.transcript);
  }
  return result;
}

GenerationResult Pipeline::generate_story(const StoryFrame& frame, ChatClient& client) const {
  return generate_from_json(to_canonical_json(frame), client);
}

GenerationResult Pipeline::generate_from_json(const std::string& frame_json, ChatClient& client) const {
  return complete_story(build_generation_prompt(frame_json), "generate", client);
}

GenerationResult Pipeline::regenerate_story(const StoryFrame& frame, const std::string& previous_story,
                                            const std::string& suggestion, ChatClient& client) const {
  return complete_story(build_regeneration_prompt(to_canonical_json(frame), previous_story, suggestion),
                        "regenerate", client);
}

}  // namespace storyframe
