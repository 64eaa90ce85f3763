#include "rtlforge/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "rtlforge/error.hpp"

namespace rtlforge {

namespace {

template <typename Enum, std::size_t N>
using NameTable = std::array<std::pair<Enum, std::string_view>, N>;

template <typename Enum, std::size_t N>
std::string_view lookup_name(const NameTable<Enum, N>& table, Enum value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "unknown";
}

template <typename Enum, std::size_t N>
Enum lookup_value(const NameTable<Enum, N>& table, std::string_view name, std::string_view what) {
    for (const auto& [e, n] : table) {
        if (n == name) return e;
    }
    fail(ErrorKind::FormatError, fmt::format("unknown {} '{}'", what, name));
}

constexpr NameTable<PromptCase, 3> kPromptCaseNames{{
    {PromptCase::Detailed, "detailed"},
    {PromptCase::Vague, "vague"},
    {PromptCase::TaskBased, "task_based"},
}};
constexpr NameTable<Severity, 2> kSeverityNames{{
    {Severity::Error, "error"},
    {Severity::Warning, "warning"},
}};
constexpr NameTable<DiagnosticCategory, 3> kCategoryNames{{
    {DiagnosticCategory::Syntax, "syntax"},
    {DiagnosticCategory::Elaboration, "elaboration"},
    {DiagnosticCategory::Other, "other"},
}};
constexpr NameTable<CoverageMetric, 4> kMetricNames{{
    {CoverageMetric::Line, "line"},
    {CoverageMetric::Toggle, "toggle"},
    {CoverageMetric::Combinational, "combinational"},
    {CoverageMetric::Fsm, "fsm"},
}};
constexpr NameTable<RepairPhase, 3> kPhaseNames{{
    {RepairPhase::SyntaxRepair, "syntax_repair"},
    {RepairPhase::FunctionalRepair, "functional_repair"},
    {RepairPhase::CoverageImprovement, "coverage_improvement"},
}};
constexpr NameTable<SimCondition, 2> kConditionNames{{
    {SimCondition::Mismatches, "mismatches"},
    {SimCondition::Timeout, "timeout"},
}};
constexpr NameTable<IterationKind, 2> kKindNames{{
    {IterationKind::Review, "review"},
    {IterationKind::Verify, "verify"},
}};
constexpr NameTable<LoopStatus, 4> kStatusNames{{
    {LoopStatus::Success, "success"},
    {LoopStatus::BudgetExhausted, "budget_exhausted"},
    {LoopStatus::ToolFailure, "tool_failure"},
    {LoopStatus::AgentFailure, "agent_failure"},
}};

[[noreturn]] void invariant(const std::string& what) {
    fail(ErrorKind::InvariantViolation, what);
}

}  // namespace

std::string_view to_string(PromptCase value) { return lookup_name(kPromptCaseNames, value); }
std::string_view to_string(Severity value) { return lookup_name(kSeverityNames, value); }
std::string_view to_string(DiagnosticCategory value) { return lookup_name(kCategoryNames, value); }
std::string_view to_string(CoverageMetric value) { return lookup_name(kMetricNames, value); }
std::string_view to_string(RepairPhase value) { return lookup_name(kPhaseNames, value); }
std::string_view to_string(SimCondition value) { return lookup_name(kConditionNames, value); }
std::string_view to_string(IterationKind value) { return lookup_name(kKindNames, value); }
std::string_view to_string(LoopStatus value) { return lookup_name(kStatusNames, value); }

template <> PromptCase enum_from_string<PromptCase>(std::string_view name) {
    return lookup_value(kPromptCaseNames, name, "prompt case");
}
template <> Severity enum_from_string<Severity>(std::string_view name) {
    return lookup_value(kSeverityNames, name, "severity");
}
template <> DiagnosticCategory enum_from_string<DiagnosticCategory>(std::string_view name) {
    return lookup_value(kCategoryNames, name, "diagnostic category");
}
template <> CoverageMetric enum_from_string<CoverageMetric>(std::string_view name) {
    return lookup_value(kMetricNames, name, "coverage metric");
}
template <> RepairPhase enum_from_string<RepairPhase>(std::string_view name) {
    return lookup_value(kPhaseNames, name, "repair phase");
}
template <> SimCondition enum_from_string<SimCondition>(std::string_view name) {
    return lookup_value(kConditionNames, name, "simulation condition");
}
template <> IterationKind enum_from_string<IterationKind>(std::string_view name) {
    return lookup_value(kKindNames, name, "iteration kind");
}
template <> LoopStatus enum_from_string<LoopStatus>(std::string_view name) {
    return lookup_value(kStatusNames, name, "loop status");
}

std::size_t CompileReport::error_count() const {
    return static_cast<std::size_t>(std::count_if(
        diagnostics.begin(), diagnostics.end(),
        [](const Diagnostic& d) { return d.severity == Severity::Error; }));
}

std::size_t CompileReport::syntax_error_count() const {
    return static_cast<std::size_t>(
        std::count_if(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
            return d.severity == Severity::Error &&
                   (d.category == DiagnosticCategory::Syntax ||
                    d.category == DiagnosticCategory::Elaboration);
        }));
}

double CoverageReport::compute_aggregate(const std::map<CoverageMetric, MetricCount>& metrics) {
    std::uint64_t covered = 0;
    std::uint64_t total = 0;
    for (const auto& [metric, count] : metrics) {
        if (count.total == 0) continue;
        covered += count.covered;
        total += count.total;
    }
    if (total == 0) return 1.0;
    return static_cast<double>(covered) / static_cast<double>(total);
}

CoverageReport CoverageReport::from_metrics(std::map<CoverageMetric, MetricCount> metrics,
                                            std::string raw_log) {
    CoverageReport report;
    report.aggregate = compute_aggregate(metrics);
    report.metrics = std::move(metrics);
    report.raw_log = std::move(raw_log);
    return report;
}

BudgetLeft budget_remaining(const Budget& budget, std::span<const IterationRecord> trace) {
    int calls = 0;
    for (const auto& record : trace) calls += record.agent_calls;
    const int iterations = static_cast<int>(trace.size());
    return BudgetLeft{std::max(0, budget.max_iterations - iterations),
                      std::max(0, budget.max_agent_calls - calls)};
}

bool is_hdl_identifier(std::string_view name) {
    if (name.empty()) return false;
    const auto first = static_cast<unsigned char>(name.front());
    if (!(std::isalpha(first) || first == '_')) return false;
    return std::all_of(name.begin() + 1, name.end(), [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || u == '_' || u == '$';
    });
}

bool is_filesystem_safe(std::string_view name) {
    if (name.empty() || name.size() > 128) return false;
    if (name == "." || name == "..") return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || u == '_' || u == '-' || u == '.';
    });
}

void validate(const DesignTask& task) {
    if (!is_filesystem_safe(task.task_id)) {
        invariant(fmt::format("task id '{}' is empty or not filesystem-safe", task.task_id));
    }
    if (task.user_prompt.empty() && !task.provided_rtl) {
        invariant(fmt::format("task '{}' has neither a prompt nor RTL", task.task_id));
    }
    if (task.prompt_case == PromptCase::TaskBased && !task.provided_rtl) {
        invariant(fmt::format("task '{}' is task-based but carries no RTL", task.task_id));
    }
}

void validate(const RtlBundle& bundle) {
    if (bundle.design_source.empty()) invariant("bundle has an empty design source");
    if (!is_hdl_identifier(bundle.top_module)) {
        invariant(fmt::format("'{}' is not a valid top module name", bundle.top_module));
    }
}

void validate(const Diagnostic& diagnostic) {
    if (diagnostic.message.empty()) invariant("diagnostic without a message");
    if (diagnostic.line && *diagnostic.line <= 0) invariant("diagnostic line must be positive");
}

void validate(const CompileReport& report) {
    for (const auto& d : report.diagnostics) validate(d);
    if (report.exit_ok && report.error_count() != 0) {
        invariant("compile report marked ok but carries error diagnostics");
    }
    if (report.wall_seconds < 0.0) invariant("negative wall time");
}

void validate(const SimReport& report) {
    if (report.passed &&
        (!report.failed_assertions.empty() || report.mismatch_count != 0 || report.timed_out)) {
        invariant("simulation report marked passed despite failure evidence");
    }
}

void validate(const CoverageReport& report) {
    for (const auto& [metric, count] : report.metrics) {
        if (count.covered > count.total) {
            invariant(fmt::format("{} coverage {}/{} exceeds its total", to_string(metric),
                                  count.covered, count.total));
        }
    }
    if (std::abs(report.aggregate - CoverageReport::compute_aggregate(report.metrics)) > 1e-12) {
        invariant("stored coverage aggregate disagrees with its metrics");
    }
}

void validate(const Budget& budget) {
    if (budget.max_iterations <= 0 || budget.max_agent_calls <= 0 ||
        budget.tool_timeout_seconds <= 0) {
        invariant("budget limits must be strictly positive");
    }
}

void validate(const LoopOutcome& outcome) {
    if (outcome.iterations_used != static_cast<int>(outcome.trace.size())) {
        invariant("iterations_used disagrees with trace length");
    }
    int previous = 0;
    for (const auto& record : outcome.trace) {
        if (record.index <= previous) invariant("trace indices must strictly increase");
        previous = record.index;
    }
}

}  // namespace rtlforge
