#include <gtest/gtest.h>

#include <algorithm>

#include "rtlforge/autodv.hpp"
#include "test_support.hpp"

namespace rtlforge {
namespace {

namespace fs = std::filesystem;
using test_support::TempDir;

AutoDVConfig dv_config(int dv_iterations = 5, double threshold = 0.90) {
    AutoDVConfig config;
    config.review_config.budget = Budget{5, 16, 10};
    config.review_config.tool_profile = test_support::stub();
    config.dv_budget = Budget{dv_iterations, 16, 10};
    config.coverage_threshold = threshold;
    return config;
}

std::shared_ptr<ChatAgent> replay(const fs::path& dir) { return std::make_shared<ReplayAgent>(dir); }

std::shared_ptr<ChatAgent> fixture(const std::string& name) {
    return replay(test_support::fixtures_dir() / "replay" / name);
}

DesignTask adder_task() {
    return make_design_task("adder",
                            "4-bit adder with inputs a[3:0], b[3:0] and output sum[4:0] that "
                            "adds the operands");
}

std::string reply(std::string_view design, const std::string& testbench) {
    return test_support::fenced(design) + test_support::fenced(testbench);
}

constexpr std::string_view kSubtractor =
    "module adder(input [3:0] a, input [3:0] b, output [4:0] sum);\n"
    "  assign sum = a - b;\n"
    "endmodule\n";

std::vector<IterationKind> kinds(const LoopOutcome& outcome) {
    std::vector<IterationKind> result;
    for (const auto& r : outcome.trace) result.push_back(r.kind);
    return result;
}

int calls_of(const LoopOutcome& outcome, IterationKind kind) {
    int calls = 0;
    for (const auto& r : outcome.trace) {
        if (r.kind == kind) calls += r.agent_calls;
    }
    return calls;
}

// Every simulation must run on a bundle whose latest compile was clean.
void expect_sim_after_clean_compile(const LoopOutcome& outcome) {
    const CompileReport* latest = nullptr;
    for (const auto& r : outcome.trace) {
        if (r.sim) {
            ASSERT_NE(latest, nullptr) << "simulation at #" << r.index << " before any compile";
            EXPECT_EQ(latest->error_count(), 0u) << "simulation at #" << r.index;
        }
        if (r.compile) latest = &*r.compile;
    }
}

TEST(AutoDV, CoverageClimbsToThreshold) {
    TempDir base;
    const auto ws = make_workspace("adder", base.path());
    AutoDVEngine engine(dv_config(), fixture("coverage_climb"));
    const auto outcome = engine.run(adder_task(), ws);
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(kinds(outcome), (std::vector{IterationKind::Review, IterationKind::Verify,
                                           IterationKind::Verify}));
    ASSERT_TRUE(outcome.trace[1].coverage && outcome.trace[2].coverage);
    EXPECT_DOUBLE_EQ(outcome.trace[1].coverage->aggregate, 0.4);
    EXPECT_DOUBLE_EQ(outcome.trace[2].coverage->aggregate, 23.0 / 25.0);
    ASSERT_TRUE(outcome.trace[1].feedback);
    EXPECT_EQ(outcome.trace[1].feedback->phase, RepairPhase::CoverageImprovement);
    EXPECT_EQ(verification_verdict(outcome, 0.90), (VerificationVerdict{true, true}));
    // the testbench revision kept the design
    EXPECT_NE(outcome.final_bundle->design_source.find("assign sum = a + b;"), std::string::npos);
    EXPECT_TRUE(fs::exists(ws.root / "iter_002" / "revision" / "design.v"));
    EXPECT_TRUE(fs::exists(ws.root / "iter_002" / "sim.log"));
    expect_sim_after_clean_compile(outcome);
}

TEST(AutoDV, CappedCoverageExhaustsBudget) {
    TempDir base;
    AutoDVEngine engine(dv_config(3), fixture("coverage_capped"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::BudgetExhausted);
    const auto trace_kinds = kinds(outcome);
    const auto verify_count = std::count(trace_kinds.begin(), trace_kinds.end(), IterationKind::Verify);
    EXPECT_EQ(verify_count, 3);
    EXPECT_EQ(verification_verdict(outcome, 0.90), (VerificationVerdict{false, true}));
    // the final iteration reports without asking for a revision
    EXPECT_EQ(outcome.trace.back().agent_calls, 0);
    EXPECT_TRUE(outcome.trace.back().feedback.has_value());
}

TEST(AutoDV, BrokenRevisionGoesBackThroughReview) {
    TempDir base;
    AutoDVEngine engine(dv_config(), fixture("revision_breaks"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_EQ(kinds(outcome), (std::vector{IterationKind::Review, IterationKind::Verify,
                                           IterationKind::Review, IterationKind::Verify}));
    ASSERT_TRUE(outcome.trace[1].compile);
    EXPECT_GT(outcome.trace[1].compile->error_count(), 0u);
    // the broken revision's compile errors drive the next review prompt
    const Diagnostic& first = outcome.trace[1].compile->diagnostics.front();
    EXPECT_NE(outcome.trace[2].prompt_sent.find(first.message), std::string::npos);
    ASSERT_TRUE(outcome.trace[2].compile);
    EXPECT_EQ(outcome.trace[2].compile->error_count(), 0u);
    EXPECT_DOUBLE_EQ(outcome.trace[3].coverage->aggregate, 23.0 / 25.0);
    expect_sim_after_clean_compile(outcome);
}

TEST(AutoDV, PersistentFailureAlwaysGetsFunctionalFeedback) {
    TempDir base;
    const std::string failing =
        reply(test_support::kAdder, test_support::adder_testbench("// stub:require NEVER_THERE\n"));
    test_support::write_replay(base / "replay", {failing, failing, failing, failing});
    AutoDVEngine engine(dv_config(3), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::BudgetExhausted);
    int verify_records = 0;
    for (const auto& r : outcome.trace) {
        if (r.kind != IterationKind::Verify) continue;
        ++verify_records;
        ASSERT_TRUE(r.sim && r.feedback);
        EXPECT_FALSE(r.sim->passed);
        EXPECT_EQ(r.feedback->phase, RepairPhase::FunctionalRepair);
        ASSERT_FALSE(r.feedback->issues.empty());
        EXPECT_TRUE(std::holds_alternative<FailedAssertion>(r.feedback->issues.front().origin));
    }
    EXPECT_EQ(verify_records, 3);
    EXPECT_EQ(verification_verdict(outcome, 0.90).functional_pass, false);
}

TEST(AutoDV, FunctionalRepairFixesDesign) {
    TempDir base;
    const std::string tb = test_support::adder_testbench("// stub:require a + b\n");
    test_support::write_replay(base / "replay",
                               {reply(kSubtractor, tb), test_support::fenced(test_support::kAdder)});
    AutoDVEngine engine(dv_config(), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    ASSERT_EQ(outcome.trace.size(), 3u);
    EXPECT_EQ(outcome.trace[1].feedback->phase, RepairPhase::FunctionalRepair);
    EXPECT_NE(outcome.trace[1].prompt_sent.find("### Current testbench"), std::string::npos);
    EXPECT_NE(outcome.final_bundle->testbench_source.find("stub:require a + b"), std::string::npos);
}

TEST(AutoDV, LockedTestbenchSurvivesFunctionalRevision) {
    TempDir base;
    const std::string tb = test_support::adder_testbench("// stub:require a + b\n");
    const std::string weakened = test_support::adder_testbench();
    test_support::write_replay(base / "replay",
                               {reply(kSubtractor, tb), reply(test_support::kAdder, weakened)});
    auto config = dv_config();
    config.regenerate_testbench = false;
    AutoDVEngine engine(config, replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    EXPECT_NE(outcome.final_bundle->testbench_source.find("stub:require a + b"), std::string::npos);
    EXPECT_NE(outcome.final_bundle->design_source.find("a + b"), std::string::npos);
}

TEST(AutoDV, MissingTestbenchIsRequested) {
    TempDir base;
    test_support::write_replay(base / "replay", {test_support::fenced(test_support::kAdder),
                                                 test_support::fenced(test_support::adder_testbench())});
    auto config = dv_config();
    config.review_config.request_testbench = false;
    AutoDVEngine engine(config, replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::Success) << outcome.detail;
    ASSERT_EQ(outcome.trace.size(), 3u);
    EXPECT_EQ(outcome.trace[1].kind, IterationKind::Review);
    EXPECT_NE(outcome.trace[1].prompt_sent.find("self-checking testbench"), std::string::npos);
    EXPECT_EQ(outcome.final_bundle->top_module, "adder");
    EXPECT_NE(outcome.final_bundle->testbench_source.find("module tb"), std::string::npos);
}

TEST(AutoDV, SimulationTimeoutIsReported) {
    TempDir base;
    const std::string hang =
        reply(test_support::kAdder, test_support::adder_testbench("// stub:sim-hang\n"));
    test_support::write_replay(base / "replay", {hang});
    auto config = dv_config(1);
    config.review_config.budget.tool_timeout_seconds = 1;
    AutoDVEngine engine(config, replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::BudgetExhausted);
    const auto& last = outcome.trace.back();
    ASSERT_TRUE(last.sim && last.feedback);
    EXPECT_TRUE(last.sim->timed_out);
    EXPECT_FALSE(last.coverage.has_value());
    ASSERT_FALSE(last.feedback->issues.empty());
    EXPECT_EQ(last.feedback->issues.front().origin, IssueOrigin{SimCondition::Timeout});
}

TEST(AutoDV, UnreadableCoverageIsToolFailure) {
    TempDir base;
    test_support::write_replay(
        base / "replay",
        {reply(test_support::kAdder, test_support::adder_testbench("// stub:coverage garbage\n"))});
    const auto ws = make_workspace("adder", base.path());
    AutoDVEngine engine(dv_config(), replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), ws);
    EXPECT_EQ(outcome.status, LoopStatus::ToolFailure);
    EXPECT_NE(outcome.detail.find("coverage is unavailable"), std::string::npos) << outcome.detail;
    EXPECT_TRUE(outcome.trace.back().sim->passed);
    EXPECT_TRUE(fs::exists(ws.root / "iter_002" / "coverage.log"));
}

TEST(AutoDV, CallBudgetsAreSeparate) {
    TempDir base;
    const std::string failing =
        reply(test_support::kAdder, test_support::adder_testbench("// stub:require NEVER_THERE\n"));
    test_support::write_replay(base / "replay", std::vector<std::string>(10, failing));
    auto config = dv_config(8);
    config.dv_budget.max_agent_calls = 2;
    AutoDVEngine engine(config, replay(base / "replay"));
    const auto outcome = engine.run(adder_task(), make_workspace("adder", base.path()));
    EXPECT_EQ(outcome.status, LoopStatus::BudgetExhausted);
    EXPECT_LE(calls_of(outcome, IterationKind::Verify), 2);
    EXPECT_LE(calls_of(outcome, IterationKind::Review), 16);
}

TEST(AutoDV, SummaryIsWritten) {
    TempDir base;
    const auto ws = make_workspace("adder", base.path());
    AutoDVEngine engine(dv_config(), fixture("coverage_climb"));
    const auto outcome = engine.run(adder_task(), ws);
    const std::string summary = read_text_file(ws.root / "verification_summary.txt");
    EXPECT_EQ(summary, verification_summary(adder_task(), outcome, 0.90));
    EXPECT_NE(summary.find("Status: success"), std::string::npos) << summary;
    EXPECT_NE(summary.find("coverage 92.00%"), std::string::npos) << summary;
    EXPECT_NE(summary.find("Coverage met: yes"), std::string::npos);
}

TEST(AutoDV, ConstructionChecksThreshold) {
    auto config = dv_config();
    config.coverage_threshold = 0.0;
    EXPECT_ERROR_KIND(AutoDVEngine(config, fixture("coverage_climb")),
                      ErrorKind::PreconditionViolation);
    config.coverage_threshold = 1.5;
    EXPECT_ERROR_KIND(AutoDVEngine(config, fixture("coverage_climb")),
                      ErrorKind::PreconditionViolation);
    config.coverage_threshold = 1.0;
    EXPECT_NO_THROW(AutoDVEngine(config, fixture("coverage_climb")));
}

TEST(VerificationVerdict, ReadsLastSimulatedRecord) {
    LoopOutcome outcome;
    outcome.status = LoopStatus::BudgetExhausted;
    IterationRecord review;
    review.index = 1;
    IterationRecord early;
    early.index = 2;
    early.kind = IterationKind::Verify;
    early.sim = SimReport{{}, 0, true, false, ""};
    early.coverage = CoverageReport::from_metrics({{CoverageMetric::Line, {95, 100}}});
    IterationRecord late = early;
    late.index = 3;
    late.sim->passed = false;
    late.coverage = CoverageReport::from_metrics({{CoverageMetric::Line, {50, 100}}});
    IterationRecord trailing_review;
    trailing_review.index = 4;
    outcome.trace = {review, early, late, trailing_review};
    outcome.iterations_used = 4;

    EXPECT_EQ(verification_verdict(outcome, 0.9), (VerificationVerdict{false, false}));
    EXPECT_EQ(verification_verdict(outcome, 0.5), (VerificationVerdict{true, false}));
    outcome.trace = {review, early};
    EXPECT_EQ(verification_verdict(outcome, 0.95), (VerificationVerdict{true, true}));
    EXPECT_EQ(verification_verdict(outcome, 0.96), (VerificationVerdict{false, true}));
    outcome.trace[1].coverage.reset();
    EXPECT_EQ(verification_verdict(outcome, 0.1), (VerificationVerdict{false, true}));
}

TEST(VerificationVerdict, NothingSimulatedIsMissingReports) {
    LoopOutcome outcome;
    EXPECT_ERROR_KIND(verification_verdict(outcome, 0.9), ErrorKind::MissingReports);
    IterationRecord review;
    review.index = 1;
    outcome.trace = {review};
    EXPECT_ERROR_KIND(verification_verdict(outcome, 0.9), ErrorKind::MissingReports);
}

TEST(AutoDVConfig, Validation) {
    auto config = dv_config();
    config.review_config.code_agent.replay_dir = "/tmp";
    EXPECT_NO_THROW(validate(config));
    config.coverage_threshold = 2.0;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
    config.coverage_threshold = 0.9;
    config.dv_budget.max_agent_calls = 0;
    EXPECT_ERROR_KIND(validate(config), ErrorKind::ConfigError);
}

}  // namespace
}  // namespace rtlforge
