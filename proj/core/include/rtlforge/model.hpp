#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rtlforge {

// How much the user told us up front. Decides whether the code agent can
// generate straight away, has to ask first, or starts from user RTL.
enum class PromptCase { Detailed, Vague, TaskBased };

struct DesignTask {
    std::string task_id;
    std::string user_prompt;
    PromptCase prompt_case = PromptCase::Detailed;
    std::optional<std::string> provided_rtl;
    std::optional<std::string> golden_testbench;

    friend bool operator==(const DesignTask&, const DesignTask&) = default;
};

struct RtlBundle {
    std::string design_source;
    std::string testbench_source;
    std::string top_module;

    friend bool operator==(const RtlBundle&, const RtlBundle&) = default;
};

enum class Severity { Error, Warning };
enum class DiagnosticCategory { Syntax, Elaboration, Other };

struct Diagnostic {
    std::string file;
    std::optional<int> line;  // absent for file-level diagnostics
    Severity severity = Severity::Error;
    DiagnosticCategory category = DiagnosticCategory::Other;
    std::string message;

    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct CompileReport {
    std::vector<Diagnostic> diagnostics;
    bool exit_ok = false;
    std::string raw_log;
    std::string tool_id;
    double wall_seconds = 0.0;

    std::size_t error_count() const;
    /// Error-severity diagnostics in the Syntax or Elaboration categories.
    std::size_t syntax_error_count() const;

    friend bool operator==(const CompileReport&, const CompileReport&) = default;
};

struct FailedAssertion {
    std::string label;
    std::optional<std::uint64_t> sim_time;
    std::string message;

    friend bool operator==(const FailedAssertion&, const FailedAssertion&) = default;
};

struct SimReport {
    std::vector<FailedAssertion> failed_assertions;
    std::uint64_t mismatch_count = 0;
    bool passed = false;
    bool timed_out = false;
    std::string raw_log;

    friend bool operator==(const SimReport&, const SimReport&) = default;
};

// Declaration order is the tie-break order for weakest-metric selection.
enum class CoverageMetric { Line, Toggle, Combinational, Fsm };

struct MetricCount {
    std::uint64_t covered = 0;
    std::uint64_t total = 0;

    friend bool operator==(const MetricCount&, const MetricCount&) = default;
};

struct CoverageReport {
    std::map<CoverageMetric, MetricCount> metrics;
    double aggregate = 1.0;
    std::string raw_log;

    /// Summed covered points over summed total points; metrics without
    /// points are ignored and an empty report counts as fully covered.
    static double compute_aggregate(const std::map<CoverageMetric, MetricCount>& metrics);
    static CoverageReport from_metrics(std::map<CoverageMetric, MetricCount> metrics,
                                       std::string raw_log = {});

    friend bool operator==(const CoverageReport&, const CoverageReport&) = default;
};

enum class RepairPhase { SyntaxRepair, FunctionalRepair, CoverageImprovement };

// Simulation failures that are not tied to a single assertion line.
enum class SimCondition { Mismatches, Timeout };

using IssueOrigin = std::variant<Diagnostic, FailedAssertion, CoverageMetric, SimCondition>;

struct ReviewIssue {
    IssueOrigin origin;
    std::string explanation;
    std::string focus_hint;

    friend bool operator==(const ReviewIssue&, const ReviewIssue&) = default;
};

struct ReviewFeedback {
    RepairPhase phase = RepairPhase::SyntaxRepair;
    std::vector<ReviewIssue> issues;

    friend bool operator==(const ReviewFeedback&, const ReviewFeedback&) = default;
};

struct Budget {
    int max_iterations = 5;
    int max_agent_calls = 16;
    int tool_timeout_seconds = 120;

    friend bool operator==(const Budget&, const Budget&) = default;
};

// Review records come from the compile gate, Verify records from the
// simulate/coverage stage of the verification loop.
enum class IterationKind { Review, Verify };

struct IterationRecord {
    int index = 0;
    IterationKind kind = IterationKind::Review;
    int agent_calls = 0;
    std::string prompt_sent;
    std::string agent_response;
    std::optional<CompileReport> compile;
    std::optional<SimReport> sim;
    std::optional<CoverageReport> coverage;
    std::optional<ReviewFeedback> feedback;

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

enum class LoopStatus { Success, BudgetExhausted, ToolFailure, AgentFailure };

struct LoopOutcome {
    LoopStatus status = LoopStatus::AgentFailure;
    int iterations_used = 0;
    std::optional<RtlBundle> final_bundle;
    std::vector<IterationRecord> trace;
    std::string detail;

    friend bool operator==(const LoopOutcome&, const LoopOutcome&) = default;
};

struct BudgetLeft {
    int iterations_left = 0;
    int calls_left = 0;

    friend bool operator==(const BudgetLeft&, const BudgetLeft&) = default;
};

BudgetLeft budget_remaining(const Budget& budget, std::span<const IterationRecord> trace);

// Identifier and naming rules.
bool is_hdl_identifier(std::string_view name);
bool is_filesystem_safe(std::string_view name);

// Invariant checks; each throws Error{InvariantViolation} on failure.
void validate(const DesignTask& task);
void validate(const RtlBundle& bundle);
void validate(const Diagnostic& diagnostic);
void validate(const CompileReport& report);
void validate(const SimReport& report);
void validate(const CoverageReport& report);
void validate(const Budget& budget);
void validate(const LoopOutcome& outcome);

// Stable names used in serialized artifacts and prompts.
std::string_view to_string(PromptCase value);
std::string_view to_string(Severity value);
std::string_view to_string(DiagnosticCategory value);
std::string_view to_string(CoverageMetric value);
std::string_view to_string(RepairPhase value);
std::string_view to_string(SimCondition value);
std::string_view to_string(IterationKind value);
std::string_view to_string(LoopStatus value);

template <typename Enum>
Enum enum_from_string(std::string_view name);

template <> PromptCase enum_from_string<PromptCase>(std::string_view name);
template <> Severity enum_from_string<Severity>(std::string_view name);
template <> DiagnosticCategory enum_from_string<DiagnosticCategory>(std::string_view name);
template <> CoverageMetric enum_from_string<CoverageMetric>(std::string_view name);
template <> RepairPhase enum_from_string<RepairPhase>(std::string_view name);
template <> SimCondition enum_from_string<SimCondition>(std::string_view name);
template <> IterationKind enum_from_string<IterationKind>(std::string_view name);
template <> LoopStatus enum_from_string<LoopStatus>(std::string_view name);

// File names the harness writes sources under; diagnostics refer to them.
inline constexpr std::string_view kDesignFileName = "design.v";
inline constexpr std::string_view kTestbenchFileName = "testbench.v";

inline constexpr CoverageMetric kAllCoverageMetrics[] = {
    CoverageMetric::Line, CoverageMetric::Toggle, CoverageMetric::Combinational,
    CoverageMetric::Fsm};

}  // namespace rtlforge
