#include <gtest/gtest.h>

#include "rtlforge/autoreview.hpp"
#include "test_support.hpp"

namespace rtlforge {
namespace {

namespace fs = std::filesystem;
using test_support::TempDir;

AutoReviewConfig review_config(int max_iterations = 5, int max_calls = 16) {
    AutoReviewConfig config;
    config.budget = Budget{max_iterations, max_calls, 10};
    config.tool_profile = test_support::stub();
    return config;
}

std::shared_ptr<ChatAgent> replay(const fs::path& dir) { return std::make_shared<ReplayAgent>(dir); }

DesignTask adder_task() {
    return make_design_task("adder",
                            "4-bit adder with inputs a[3:0], b[3:0] and output sum[4:0] that "
                            "adds the operands");
}

std::string bad_reply() {
    return test_support::fenced(test_support::kAdderMissingSemicolon) +
           test_support::fenced(test_support::adder_testbench());
}

std::string good_reply() {
    return test_support::fenced(test_support::kAdder) +
           test_support::fenced(test_support::adder_testbench());
}

int total_calls(const LoopOutcome& outcome) {
    int calls = 0;
    for (const auto& r : outcome.trace) calls += r.agent_calls;
    return calls;
}

// ---------------------------------------------------------------------------
// classify / make_design_task

TEST(ClassifyPrompt, Examples) {
    EXPECT_EQ(classify_prompt("8-bit counter, ports clk, rst, q[7:0], synchronous reset to 0"),
              PromptCase::Detailed);
    EXPECT_EQ(classify_prompt("make me something that counts"), PromptCase::Vague);
    EXPECT_EQ(classify_prompt("verify this", std::string(test_support::kAdder)),
              PromptCase::TaskBased);
}

TEST(ClassifyPrompt, EmbeddedModuleNeedsImperative) {
    const std::string with_code = "Please compile this:\n" + std::string(test_support::kAdder);
    EXPECT_EQ(classify_prompt(with_code), PromptCase::TaskBased);
    EXPECT_NE(classify_prompt("Here is a module:\n" + std::string(test_support::kAdder)),
              PromptCase::TaskBased);
    EXPECT_EQ(classify_prompt("verify my adder"), PromptCase::Vague);
}

TEST(ClassifyPrompt, PortsWithoutBehaviorAreVague) {
    EXPECT_EQ(classify_prompt("something with input a"), PromptCase::Vague);
    EXPECT_EQ(classify_prompt("a mux with input sel that selects between a and b"),
              PromptCase::Detailed);
    EXPECT_EQ(classify_prompt("an adder", std::string("   \n")), PromptCase::Vague);
}

TEST(MakeDesignTask, ExtractsEmbeddedRtl) {
    const auto task =
        make_design_task("t", "Please verify this design:\n" + test_support::fenced(test_support::kAdder));
    EXPECT_EQ(task.prompt_case, PromptCase::TaskBased);
    ASSERT_TRUE(task.provided_rtl.has_value());
    EXPECT_NE(task.provided_rtl->find("module adder"), std::string::npos);
    EXPECT_ERROR_KIND(make_design_task("bad/id", "x"), ErrorKind::InvariantViolation);
}

// ---------------------------------------------------------------------------
// elicit_details

TEST(ElicitDetails, AnswerIsMergedIntoPrompt) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"1. How wide is the counter?", "READY"});
    ReplayAgent agent(dir.path());
    ScriptedChannel channel({"8 bits; wraps at max"});
    auto config = review_config();
    config.interactive = true;
    const auto result = elicit_details("make me something that counts", agent, &channel, config);
    EXPECT_NE(result.enriched_prompt.find("make me something that counts"), std::string::npos);
    EXPECT_NE(result.enriched_prompt.find("8 bits; wraps at max"), std::string::npos);
    EXPECT_EQ(result.agent_calls, 2);
    EXPECT_EQ(channel.questions_seen(), (std::vector<std::string>{"1. How wide is the counter?"}));
}

TEST(ElicitDetails, StopsAfterThreeRoundsWithoutReady) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"q1?", "q2?", "q3?", "q4?"});
    ReplayAgent agent(dir.path());
    ScriptedChannel channel({"a1", "a2", "a3", "a4"});
    auto config = review_config();
    config.interactive = true;
    const auto result = elicit_details("something", agent, &channel, config);
    EXPECT_EQ(result.rounds, 3);
    EXPECT_EQ(result.agent_calls, 3);
    EXPECT_EQ(agent.consumed(), 3u);
    EXPECT_NE(result.enriched_prompt.find("a3"), std::string::npos);
    EXPECT_EQ(result.enriched_prompt.find("a4"), std::string::npos);
}

TEST(ElicitDetails, EmptyAnswerEndsDialogue) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"q1?", "q2?"});
    ReplayAgent agent(dir.path());
    ScriptedChannel channel({});
    auto config = review_config();
    config.interactive = true;
    const auto result = elicit_details("something", agent, &channel, config);
    EXPECT_EQ(result.agent_calls, 1);
    EXPECT_EQ(result.enriched_prompt, "something");
}

TEST(ElicitDetails, NonInteractiveIsUnavailable) {
    TempDir dir;
    test_support::write_replay(dir.path(), {"q?"});
    ReplayAgent agent(dir.path());
    ScriptedChannel channel({"x"});
    EXPECT_ERROR_KIND(elicit_details("something", agent, &channel, review_config()),
                      ErrorKind::InteractionUnavailable);
    auto config = review_config();
    config.interactive = true;
    EXPECT_ERROR_KIND(elicit_details("something", agent, nullptr, config),
                      ErrorKind::InteractionUnavailable);
}

// ---------------------------------------------------------------------------
// Loop

TEST(AutoReview, FixtureRepairsSyntaxErrorInTwoIterations) {
    TempDir base;
    const auto ws = make_workspace("adder", base.path());
    AutoReviewEngine engine(review_config(), replay(test_support::fixtures_dir() / "replay" / "adder_fix"));
    const auto outcome = engine.run(adder_task(), ws);
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(outcome.iterations_used, 2);
    ASSERT_EQ(outcome.trace.size(), 2u);
    ASSERT_TRUE(outcome.trace[0].compile && outcome.trace[1].compile);
    EXPECT_GT(outcome.trace[0].compile->error_count(), 0u);
    EXPECT_EQ(outcome.trace[1].compile->error_count(), 0u);
    ASSERT_TRUE(outcome.trace[0].feedback);
    EXPECT_EQ(outcome.trace[0].feedback->phase, RepairPhase::SyntaxRepair);
    ASSERT_TRUE(outcome.final_bundle);
    EXPECT_EQ(outcome.final_bundle->top_module, "adder");

    EXPECT_TRUE(fs::exists(ws.root / "outcome.json"));
    EXPECT_TRUE(fs::exists(ws.root / "transcript_001.json"));
    EXPECT_TRUE(fs::exists(ws.root / "iter_001" / "prompt.txt"));
    EXPECT_TRUE(fs::exists(ws.root / "iter_002" / "response.txt"));
    EXPECT_EQ(from_json_text<LoopOutcome>(read_text_file(ws.root / "outcome.json")), outcome);
}

TEST(AutoReview, BadResponsesExhaustBudget) {
    TempDir base;
    test_support::write_replay(base / "replay", {bad_reply(), bad_reply(), bad_reply(), good_reply()});
    AutoReviewEngine engine(review_config(3), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::BudgetExhausted);
    EXPECT_EQ(outcome.trace.size(), 3u);
    EXPECT_EQ(outcome.iterations_used, 3);
}

TEST(AutoReview, AgentCallBudgetIsHonoured) {
    TempDir base;
    test_support::write_replay(base / "replay", {bad_reply(), bad_reply(), bad_reply(), bad_reply()});
    AutoReviewEngine engine(review_config(5, 2), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::BudgetExhausted);
    EXPECT_LE(total_calls(outcome), 2);
}

TEST(AutoReview, CleanProvidedRtlNeedsNoPrompt) {
    TempDir base;
    fs::create_directories(base / "empty");
    auto agent = std::make_shared<ReplayAgent>(base / "empty");
    AutoReviewEngine engine(review_config(), agent);
    const auto task = make_design_task("adder", "compile this", std::string(test_support::kAdder));
    const auto ws = make_workspace("adder", base.path());
    const auto outcome = engine.run(task, ws);
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(outcome.iterations_used, 1);
    EXPECT_TRUE(outcome.trace[0].prompt_sent.empty());
    EXPECT_EQ(outcome.trace[0].agent_calls, 0);
    EXPECT_EQ(agent->consumed(), 0u);
    EXPECT_FALSE(fs::exists(ws.root / "iter_001" / "prompt.txt"));
}

TEST(AutoReview, BrokenProvidedRtlIsRepaired) {
    TempDir base;
    test_support::write_replay(base / "replay", {test_support::fenced(test_support::kAdder)});
    AutoReviewEngine engine(review_config(), replay(base / "replay"));
    const auto task =
        make_design_task("adder", "compile this", std::string(test_support::kAdderMissingSemicolon));
    const auto outcome = engine.run(task, make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(outcome.iterations_used, 2);
    EXPECT_TRUE(outcome.trace[0].prompt_sent.empty());
    EXPECT_NE(outcome.trace[1].prompt_sent.find("syntax"), std::string::npos);
}

TEST(AutoReview, EachRepairPromptEmbedsPreviousIssue) {
    TempDir base;
    test_support::write_replay(base / "replay", {bad_reply(), bad_reply(), bad_reply(), good_reply()});
    AutoReviewEngine engine(review_config(5), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    ASSERT_EQ(outcome.status, LoopStatus::Success);
    ASSERT_EQ(outcome.trace.size(), 4u);
    for (std::size_t i = 0; i + 1 < outcome.trace.size(); ++i) {
        EXPECT_EQ(outcome.trace[i].index + 1, outcome.trace[i + 1].index);
        ASSERT_TRUE(outcome.trace[i].feedback);
        const auto& issues = outcome.trace[i].feedback->issues;
        const bool embedded = std::any_of(issues.begin(), issues.end(), [&](const ReviewIssue& issue) {
            return outcome.trace[i + 1].prompt_sent.find(issue.explanation) != std::string::npos;
        });
        EXPECT_TRUE(embedded) << "iteration " << i + 2;
    }
}

TEST(AutoReview, AmbiguousReplyGetsOneDisambiguationPrompt) {
    TempDir base;
    const std::string ambiguous = test_support::fenced("module a(input x); endmodule\n") +
                                  test_support::fenced("module b(input y); endmodule\n");
    test_support::write_replay(base / "replay", {ambiguous, good_reply()});
    AutoReviewEngine engine(review_config(), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(outcome.iterations_used, 1);
    EXPECT_EQ(outcome.trace[0].agent_calls, 2);
    EXPECT_NE(outcome.trace[0].prompt_sent.find(disambiguation_prompt()), std::string::npos);
}

TEST(AutoReview, ProseReplyIsReprompted) {
    TempDir base;
    test_support::write_replay(base / "replay", {"I think an adder is easy.", good_reply()});
    AutoReviewEngine engine(review_config(), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    ASSERT_EQ(outcome.iterations_used, 2);
    EXPECT_FALSE(outcome.trace[0].compile.has_value());
    EXPECT_EQ(outcome.trace[1].prompt_sent, missing_code_prompt());
}

TEST(AutoReview, ReplayExhaustionIsAgentFailure) {
    TempDir base;
    test_support::write_replay(base / "replay", {bad_reply()});
    AutoReviewEngine engine(review_config(), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::AgentFailure);
    EXPECT_NE(outcome.detail.find("ReplayExhausted"), std::string::npos) << outcome.detail;
    EXPECT_NO_THROW(validate(outcome));
}

TEST(AutoReview, MissingCompilerIsToolFailure) {
    TempDir base;
    test_support::write_replay(base / "replay", {good_reply()});
    auto config = review_config();
    config.tool_profile.compile_cmd = {{"rtlforge-no-such-compiler", "{design}"}};
    AutoReviewEngine engine(config, replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::ToolFailure);
    EXPECT_NE(outcome.detail.find("rtlforge-no-such-compiler"), std::string::npos);
}

TEST(AutoReview, SuccessIsReproducibleByRecompiling) {
    TempDir base;
    AutoReviewEngine engine(review_config(), replay(test_support::fixtures_dir() / "replay" / "adder_fix"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    ASSERT_EQ(outcome.status, LoopStatus::Success);
    const auto report = compile(test_support::stub(), *outcome.final_bundle,
                                make_workspace("recheck", base.path()));
    EXPECT_TRUE(report.exit_ok);
    EXPECT_EQ(report.error_count(), 0u);
}

TEST(AutoReview, ReviewAgentAnalysisIsEmbedded) {
    TempDir base;
    test_support::write_replay(base / "code", {bad_reply(), good_reply()});
    test_support::write_replay(base / "review", {"Line 2 lacks a terminating semicolon."});
    auto config = review_config();
    config.review_agent = default_agent_config(AgentRole::Review);
    const auto ws = make_workspace("adder", base.path());
    AutoReviewEngine engine(config, replay(base / "code"), replay(base / "review"));
    const auto outcome = engine.run(adder_task(), ws);
    ASSERT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_NE(outcome.trace[1].prompt_sent.find("Line 2 lacks a terminating semicolon."),
              std::string::npos);
    EXPECT_EQ(outcome.trace[1].agent_calls, 2);
    // code and review transcripts
    EXPECT_TRUE(fs::exists(ws.root / "transcript_002.json"));
    const auto review = from_json_text<Transcript>(read_text_file(ws.root / "transcript_002.json"));
    EXPECT_EQ(review.agent_role, AgentRole::Review);
    EXPECT_NE(review.messages[1].content.find("4-bit adder"), std::string::npos);
}

TEST(AutoReview, VagueInteractiveChargesCallsNotIterations) {
    TempDir base;
    test_support::write_replay(base / "replay", {"What width?", "READY", good_reply()});
    ScriptedChannel channel({"4 bits"});
    auto config = review_config();
    config.interactive = true;
    AutoReviewEngine engine(config, replay(base / "replay"), nullptr, &channel);
    const auto task = make_design_task("adder", "make me an adding thing");
    ASSERT_EQ(task.prompt_case, PromptCase::Vague);
    const auto outcome = engine.run(task, make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(outcome.iterations_used, 1);
    EXPECT_EQ(outcome.trace[0].agent_calls, 3);
    EXPECT_NE(outcome.trace[0].prompt_sent.find("4 bits"), std::string::npos);
}

TEST(AutoReview, VagueNonInteractiveDoesNotBlock) {
    TempDir base;
    test_support::write_replay(base / "replay", {good_reply()});
    AutoReviewEngine engine(review_config(), replay(base / "replay"));
    const auto outcome =
        engine.run(make_design_task("adder", "make me an adding thing"), make_workspace("a", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_NE(outcome.trace[0].prompt_sent.find("assumptions"), std::string::npos);
}

TEST(AutoReview, DecisionsIndependentOfProvider) {
    TempDir base;
    test_support::write_replay(base / "replay", {bad_reply(), bad_reply(), good_reply()});
    test_support::FakeChatServer server(base / "replay");
    AgentConfig http = default_agent_config(AgentRole::Code);
    http.provider = ProviderKind::HttpChat;
    http.model_id = "another-model";
    http.endpoint = server.endpoint();

    AutoReviewEngine by_replay(review_config(), replay(base / "replay"));
    AutoReviewEngine by_http(review_config(), make_agent(http));
    const auto a = by_replay.run(adder_task(), make_workspace("adder", base.path()));
    const auto b = by_http.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(a.status, b.status);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].prompt_sent, b.trace[i].prompt_sent);
        EXPECT_EQ(a.trace[i].agent_response, b.trace[i].agent_response);
        EXPECT_EQ(a.trace[i].agent_calls, b.trace[i].agent_calls);
        EXPECT_EQ(a.trace[i].compile->diagnostics, b.trace[i].compile->diagnostics);
        EXPECT_EQ(a.trace[i].feedback, b.trace[i].feedback);
    }
    EXPECT_EQ(a.final_bundle, b.final_bundle);
}

TEST(AutoReview, TranscriptEvictionKeepsContextBounded) {
    TempDir base;
    test_support::write_replay(base / "replay", {bad_reply(), bad_reply(), bad_reply(), good_reply()});
    auto config = review_config();
    config.context_budget_chars = 2000;
    const auto ws = make_workspace("adder", base.path());
    AutoReviewEngine engine(config, replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), ws);
    ASSERT_EQ(outcome.status, LoopStatus::Success);
    const auto transcript = from_json_text<Transcript>(read_text_file(ws.root / "transcript_001.json"));
    EXPECT_NO_THROW(validate(transcript));
    EXPECT_LT(transcript.messages.size(), 1u + 2u * 4u);
    EXPECT_EQ(transcript.messages[1].content, outcome.trace[0].prompt_sent);
}

TEST(AutoReview, ConfigValidation) {
    auto config = review_config();
    EXPECT_NO_THROW(validate([&] {
        auto c = config;
        c.code_agent.replay_dir = "/tmp";
        return c;
    }()));
    config.budget.max_iterations = 0;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
    EXPECT_ERROR_KIND(AutoReviewEngine(review_config(), nullptr), ErrorKind::PreconditionViolation);
}

TEST(AutoReview, DefaultBudget) { EXPECT_EQ(AutoReviewConfig{}.budget.max_iterations, 5); }

}  // namespace
}  // namespace rtlforge
