#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtlforge/model.hpp"
#include "rtlforge/serialize.hpp"

namespace rtlforge {

/// One anchored line pattern. Named capture groups (file, line, message,
/// label, time, metric, covered, total, covered2, total2, count, severity,
/// category) fill the matching fields; `fields` supplies constants for any
/// name the pattern does not capture.
class MatchRule {
public:
    MatchRule(std::string pattern, std::map<std::string, std::string> fields = {});

    const std::string& pattern() const { return pattern_; }
    const std::map<std::string, std::string>& fields() const { return fields_; }

    /// Field values when the whole line matches, otherwise nullopt. Regex
    /// engine limits count as a non-match.
    std::optional<std::map<std::string, std::string>> match(std::string_view line) const;

    /// True when the rule can yield `name`, by capture or constant.
    bool provides(const std::string& name) const;

private:
    std::string pattern_;
    std::map<std::string, std::string> fields_;
    std::vector<std::string> captures_;
    struct Compiled;
    std::shared_ptr<const Compiled> compiled_;
};

/// Per-tool log grammar. Rules are tried in order and the first match wins.
struct ParseRuleSet {
    std::string tool_id;
    std::vector<MatchRule> ignore_patterns;
    std::vector<MatchRule> error_patterns;
    std::vector<MatchRule> assertion_patterns;
    std::vector<MatchRule> mismatch_patterns;
    std::vector<MatchRule> coverage_section_patterns;
    std::vector<MatchRule> coverage_row_patterns;
};

void validate(const ParseRuleSet& rules);
void to_json(Json& j, const ParseRuleSet& v);
void from_json(const Json& j, ParseRuleSet& v);

ParseRuleSet load_rule_set(const std::filesystem::path& file);
/// Rule sets compiled into the library ("icarus", "stub"); throws
/// ConfigError for other ids.
ParseRuleSet builtin_rule_set(std::string_view tool_id);
/// Looks for <rules_dir>/<tool_id>.json first, then the built-ins.
ParseRuleSet resolve_rule_set(std::string_view tool_id, const std::filesystem::path& rules_dir);

std::vector<Diagnostic> parse_compile_log(const ParseRuleSet& rules, std::string_view raw,
                                          bool exit_ok);
SimReport parse_sim_log(const ParseRuleSet& rules, std::string_view raw, bool timed_out);
/// Throws ParseFailure when raw is non-empty and no coverage row matches.
CoverageReport parse_coverage_report(const ParseRuleSet& rules, std::string_view raw);

/// Maps tool spellings ("LINE", "Combinational Logic", "FSM"...) to a metric.
std::optional<CoverageMetric> normalize_metric_name(std::string_view name);

struct DistillOptions {
    std::size_t cap = 10;
    double coverage_threshold = 0.90;
};

/// Turns the reports of one iteration into a ranked issue list. Phase
/// precedence is syntax > functional > coverage. Throws NothingToDistill
/// when every supplied report is clean.
ReviewFeedback distill(const std::optional<CompileReport>& compile,
                       const std::optional<SimReport>& sim,
                       const std::optional<CoverageReport>& coverage,
                       const DistillOptions& options = {});

/// Metric with the lowest covered/total ratio; ties go to the earlier
/// metric in line < toggle < combinational < fsm order.
std::optional<CoverageMetric> weakest_metric(const CoverageReport& coverage);

/// Last `max_bytes` of a log, cut at a line boundary when possible.
std::string log_excerpt(std::string_view raw, std::size_t max_bytes = 8 * 1024);

/// Prompt asking the review agent to analyse the distilled issues.
std::string render_analysis_request(const ReviewFeedback& feedback, std::string_view raw_log,
                                     std::size_t excerpt_bytes = 8 * 1024);

std::string render_review_prompt(const ReviewFeedback& feedback, const RtlBundle& current_bundle,
                                 const std::optional<std::string>& agent_analysis = std::nullopt);

/// One-line description of an issue origin, as used in prompts.
std::string describe_origin(const IssueOrigin& origin);

}  // namespace rtlforge
