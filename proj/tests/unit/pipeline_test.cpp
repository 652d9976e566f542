#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "storyframe/prompt_pipeline.hpp"

namespace storyframe {
namespace {

const std::string kStory = "Jack shoved Ryan on the basketball court. Mr. Lee made them talk.";

Json golden_doc() { return Json::parse(fixtures::golden_bytes()); }

std::string fragment(const char* key) { return Json{{key, golden_doc()[key]}}.dump(); }

// Replies in chain order: entities, events, outline, relationships.
std::vector<std::string> chain_replies() {
  return {fragment("entities"), fragment("events"), fragment("outline"), fragment("relationships")};
}

TEST(ParseChain, StepsRunInOrderAndEmbedPriorResults) {
  ScriptedChatClient client(chain_replies());
  const auto result = Pipeline().run_parse_chain(kStory, Strategy::tidd_ec_chain, client);
  EXPECT_EQ(to_canonical_json(result.frame), fixtures::golden_bytes());

  const auto& t = result.state.transcript;
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[0].step, "parse_entities");
  EXPECT_EQ(t[1].step, "parse_events");
  EXPECT_EQ(t[2].step, "parse_outline");
  EXPECT_EQ(t[3].step, "parse_relationships");
  EXPECT_NE(t[0].prompt.find("Chain step entities:"), std::string::npos);
  // Every step sees the story and the accepted output of each earlier step.
  const auto entities = Json{{"entities", golden_doc()["entities"]}}.dump(2);
  const auto events = Json{{"events", golden_doc()["events"]}}.dump(2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NE(t[i].prompt.find(kStory), std::string::npos) << i;
    EXPECT_EQ(t[i].prompt.find(entities) != std::string::npos, i >= 1) << i;
    EXPECT_EQ(t[i].prompt.find(events) != std::string::npos, i >= 2) << i;
    EXPECT_EQ(t[i].attempt, 0);
    EXPECT_EQ(t[i].error, "");
  }
  ASSERT_EQ(result.state.step_results.size(), 4u);
  EXPECT_EQ(result.state.step_results[2].first, "outline");
}

TEST(ParseChain, Deterministic) {
  ScriptedChatClient a(chain_replies()), b(chain_replies());
  const auto ra = Pipeline().run_parse_chain(kStory, Strategy::tidd_ec_chain, a);
  const auto rb = Pipeline().run_parse_chain(kStory, Strategy::tidd_ec_chain, b);
  EXPECT_EQ(ra.frame, rb.frame);
  EXPECT_EQ(ra.state.transcript, rb.state.transcript);
}

TEST(ParseChain, OneRepairThenSuccess) {
  auto replies = chain_replies();
  replies.insert(replies.begin() + 1, "{\"events\": [{\"event_id\": \"event_1\"}]}");
  ScriptedChatClient client(replies);
  const auto result = Pipeline().run_parse_chain(kStory, Strategy::tidd_ec_chain, client);
  const auto& t = result.state.transcript;
  ASSERT_EQ(t.size(), 5u);
  EXPECT_EQ(t[1].step, "parse_events");
  EXPECT_EQ(t[1].attempt, 0);
  EXPECT_NE(t[1].error, "");
  EXPECT_EQ(t[2].step, "parse_events");
  EXPECT_EQ(t[2].attempt, 1);
  EXPECT_EQ(t[2].error, "");
  EXPECT_NE(t[2].prompt.find("### Repair"), std::string::npos);
  EXPECT_NE(t[2].prompt.find(t[1].error), std::string::npos);
  EXPECT_EQ(to_canonical_json(result.frame), fixtures::golden_bytes());
}

TEST(ParseChain, RepairExhaustedAfterFourCalls) {
  ScriptedChatClient client({fragment("entities"), "not json", "still not", "{}", "[1]"});
  try {
    Pipeline().run_parse_chain(kStory, Strategy::tidd_ec_chain, client);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.kind(), PipelineErrorKind::repair_exhausted);
    EXPECT_EQ(e.step(), "parse_events");
    EXPECT_EQ(e.attempts(), 4);
    EXPECT_EQ(e.transcript().size(), 5u);
  }
  EXPECT_EQ(client.call_count(), 5u);
}

TEST(ParseChain, MaxRepairsIsConfigurable) {
  ScriptedChatClient client({"x", "y"});
  PipelineOptions options;
  options.max_repairs = 1;
  try {
    Pipeline(TemplateSet::builtin(), options).run_parse_chain(kStory, Strategy::tidd_ec_chain, client);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.kind(), PipelineErrorKind::repair_exhausted);
    EXPECT_EQ(e.attempts(), 2);
  }
  EXPECT_THROW(Pipeline(TemplateSet::builtin(), PipelineOptions{-1, {}, {}}), std::invalid_argument);
}

TEST(ParseChain, UnavailableClientAbortsWithTranscript) {
  ScriptedChatClient client;
  client.push(ScriptedReply::text(fragment("entities")));
  client.push(ScriptedReply::failure(LlmErrorKind::unavailable));
  try {
    Pipeline().run_parse_chain(kStory, Strategy::tidd_ec_chain, client);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.kind(), PipelineErrorKind::llm_unavailable);
    EXPECT_EQ(e.step(), "parse_events");
    EXPECT_EQ(e.transcript().size(), 2u);
  }
}

TEST(ParseChain, EmptyStoryIsRejected) {
  ScriptedChatClient client;
  EXPECT_THROW(Pipeline().run_parse_chain("  \n", Strategy::tidd_ec_chain, client), std::invalid_argument);
  EXPECT_EQ(client.call_count(), 0u);
}

TEST(SingleShot, EveryStrategyParsesAFullDocument) {
  for (Strategy s : {Strategy::zero_shot, Strategy::tidd_ec, Strategy::tidd_ec_cot}) {
    ScriptedChatClient client({"Here you go:\n```json\n" + fixtures::golden_bytes() + "\n```\nDone."});
    const auto result = Pipeline().run_parse_chain(kStory, s, client);
    EXPECT_EQ(to_canonical_json(result.frame), fixtures::golden_bytes()) << to_string(s);
    ASSERT_EQ(result.state.transcript.size(), 1u);
    EXPECT_EQ(result.state.transcript[0].step, "parse_frame");
  }
}

TEST(SingleShot, PromptsDifferByStrategy) {
  const Pipeline p;
  const auto zero = p.single_shot_prompt(Strategy::zero_shot, kStory);
  const auto tidd = p.single_shot_prompt(Strategy::tidd_ec, kStory);
  const auto cot = p.single_shot_prompt(Strategy::tidd_ec_cot, kStory);
  EXPECT_NE(zero.find("Convert the following story"), std::string::npos);
  EXPECT_EQ(zero.find("### Task"), std::string::npos);
  EXPECT_NE(tidd.find("Frame extraction:"), std::string::npos);
  EXPECT_NE(cot.find("Reason step by step"), std::string::npos);
  EXPECT_EQ(tidd.find("Reason step by step"), std::string::npos);
  EXPECT_THROW(p.single_shot_prompt(Strategy::tidd_ec_chain, kStory), std::invalid_argument);
}

TEST(ExtractJson, HandlesFencesAndProse) {
  EXPECT_EQ(extract_json("{\"a\": 1}"), Json::parse("{\"a\": 1}"));
  EXPECT_EQ(extract_json("Sure!\n```json\n{\"a\": [1, 2]}\n```"), Json::parse("{\"a\": [1, 2]}"));
  EXPECT_EQ(extract_json("```\n[3]\n```"), Json::parse("[3]"));
  EXPECT_EQ(extract_json("The answer is {\"a\": \"}\"} as requested."), Json::parse("{\"a\": \"}\"}"));
  EXPECT_EQ(extract_json("nothing here"), std::nullopt);
  EXPECT_EQ(extract_json("{broken"), std::nullopt);
}

TEST(Generate, PromptEmbedsCanonicalJson) {
  const auto frame = from_canonical_json(fixtures::golden_bytes());
  ScriptedChatClient client({"Once upon a time, Jack said sorry."});
  const auto result = Pipeline().generate_story(frame, client);
  EXPECT_EQ(result.story, "Once upon a time, Jack said sorry.");
  EXPECT_NE(result.prompt.find(fixtures::golden_bytes()), std::string::npos);
  EXPECT_NE(result.prompt.find("Story generation:"), std::string::npos);
  ASSERT_EQ(result.transcript.size(), 1u);
  EXPECT_EQ(result.transcript[0].step, "generate");
  EXPECT_EQ(result.prompt, Pipeline().build_generation_prompt(fixtures::golden_bytes()));
}

TEST(Generate, EmptyReplyFails) {
  const auto frame = from_canonical_json(fixtures::golden_bytes());
  ScriptedChatClient client({"  \n"});
  try {
    Pipeline().generate_story(frame, client);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.kind(), PipelineErrorKind::empty_generation);
  }
}

TEST(Regenerate, PromptCarriesPreviousStoryAndSuggestion) {
  const auto frame = from_canonical_json(fixtures::golden_bytes());
  ScriptedChatClient client({"A revised story."});
  const auto result = Pipeline().regenerate_story(frame, "Old story.", "Show Jack's regret.", client);
  EXPECT_EQ(result.story, "A revised story.");
  EXPECT_NE(result.prompt.find("### Previous version\nOld story."), std::string::npos);
  EXPECT_NE(result.prompt.find("Show Jack's regret."), std::string::npos);
  EXPECT_EQ(result.transcript[0].step, "regenerate");
  const auto bare = Pipeline().build_regeneration_prompt(fixtures::golden_bytes(), "Old story.", "");
  EXPECT_EQ(bare.find("### Requested changes"), std::string::npos);
}

TEST(Options, GenerateSendsOneUserMessage) {
  PipelineOptions options;
  options.temperature = 0.2;
  options.seed = 42;
  ScriptedChatClient client({"story"});
  Pipeline(TemplateSet::builtin(), options).generate_from_json("{}", client);
  ASSERT_EQ(client.call_count(), 1u);
  EXPECT_EQ(client.calls()[0].messages.size(), 1u);
  EXPECT_EQ(client.calls()[0].messages[0].role, Role::user);
}

}  // namespace
}  // namespace storyframe
