#include "rtlforge/distiller.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <tuple>

#include <boost/regex.hpp>
#include <fmt/format.h>

#include "builtin_rules.hpp"
#include "rtlforge/error.hpp"

namespace fs = std::filesystem;

namespace rtlforge {

// ---------------------------------------------------------------------------
// MatchRule

struct MatchRule::Compiled {
    boost::regex regex;
};

MatchRule::MatchRule(std::string pattern, std::map<std::string, std::string> fields)
    : pattern_(std::move(pattern)), fields_(std::move(fields)) {
    try {
        compiled_ = std::make_shared<const Compiled>(
            Compiled{boost::regex(pattern_, boost::regex::perl)});
    } catch (const boost::regex_error& e) {
        fail(ErrorKind::ConfigError, fmt::format("bad pattern '{}': {}", pattern_, e.what()));
    }
    static const boost::regex kNamedGroup(R"(\(\?<([A-Za-z_][A-Za-z0-9_]*)>)");
    for (auto it = boost::sregex_iterator(pattern_.begin(), pattern_.end(), kNamedGroup);
         it != boost::sregex_iterator(); ++it) {
        captures_.push_back((*it)[1].str());
    }
}

std::optional<std::map<std::string, std::string>> MatchRule::match(std::string_view line) const {
    boost::match_results<std::string_view::const_iterator> m;
    try {
        if (!boost::regex_match(line.begin(), line.end(), m, compiled_->regex)) return std::nullopt;
    } catch (const std::runtime_error&) {
        // complexity limit hit on pathological input
        return std::nullopt;
    }
    std::map<std::string, std::string> values = fields_;
    for (const auto& name : captures_) {
        const auto& group = m[name.c_str()];
        if (group.matched) values[name] = group.str();
    }
    return values;
}

bool MatchRule::provides(const std::string& name) const {
    return fields_.contains(name) ||
           std::find(captures_.begin(), captures_.end(), name) != captures_.end();
}

// ---------------------------------------------------------------------------
// Rule sets

namespace {

void require_all(const std::vector<MatchRule>& rules, std::initializer_list<const char*> names,
                 std::string_view list, std::string_view tool) {
    for (const auto& rule : rules) {
        for (const char* name : names) {
            if (!rule.provides(name)) {
                fail(ErrorKind::ConfigError,
                     fmt::format("{} rule '{}' of tool '{}' yields no '{}'", list, rule.pattern(),
                                 tool, name));
            }
        }
    }
}

Json rules_to_json(const std::vector<MatchRule>& rules) {
    Json out = Json::array();
    for (const auto& rule : rules) {
        Json entry = Json::object();
        entry["pattern"] = rule.pattern();
        if (!rule.fields().empty()) {
            Json fields = Json::object();
            for (const auto& [k, v] : rule.fields()) fields[k] = v;
            entry["fields"] = std::move(fields);
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<MatchRule> rules_from_json(const Json& j, const char* key) {
    std::vector<MatchRule> rules;
    auto it = j.find(key);
    if (it == j.end()) return rules;
    for (const auto& entry : *it) {
        std::map<std::string, std::string> fields;
        if (auto f = entry.find("fields"); f != entry.end()) {
            for (const auto& [k, v] : f->items()) fields[k] = v.get<std::string>();
        }
        rules.emplace_back(entry.at("pattern").get<std::string>(), std::move(fields));
    }
    return rules;
}

}  // namespace

void validate(const ParseRuleSet& rules) {
    if (rules.tool_id.empty()) fail(ErrorKind::ConfigError, "rule set without tool_id");
    require_all(rules.error_patterns, {"message"}, "error", rules.tool_id);
    require_all(rules.assertion_patterns, {"message"}, "assertion", rules.tool_id);
    require_all(rules.coverage_section_patterns, {"metric"}, "coverage section", rules.tool_id);
    require_all(rules.coverage_row_patterns, {"covered", "total"}, "coverage row", rules.tool_id);
}

void to_json(Json& j, const ParseRuleSet& v) {
    j = Json::object();
    j["tool_id"] = v.tool_id;
    j["ignore_patterns"] = rules_to_json(v.ignore_patterns);
    j["error_patterns"] = rules_to_json(v.error_patterns);
    j["assertion_patterns"] = rules_to_json(v.assertion_patterns);
    j["mismatch_patterns"] = rules_to_json(v.mismatch_patterns);
    j["coverage_section_patterns"] = rules_to_json(v.coverage_section_patterns);
    j["coverage_row_patterns"] = rules_to_json(v.coverage_row_patterns);
}

void from_json(const Json& j, ParseRuleSet& v) {
    v.tool_id = j.at("tool_id").get<std::string>();
    v.ignore_patterns = rules_from_json(j, "ignore_patterns");
    v.error_patterns = rules_from_json(j, "error_patterns");
    v.assertion_patterns = rules_from_json(j, "assertion_patterns");
    v.mismatch_patterns = rules_from_json(j, "mismatch_patterns");
    v.coverage_section_patterns = rules_from_json(j, "coverage_section_patterns");
    v.coverage_row_patterns = rules_from_json(j, "coverage_row_patterns");
}

ParseRuleSet load_rule_set(const fs::path& file) {
    ParseRuleSet rules;
    try {
        rules = Json::parse(read_text_file(file)).get<ParseRuleSet>();
    } catch (const Json::exception& e) {
        fail(ErrorKind::ConfigError, fmt::format("{}: {}", file.string(), e.what()));
    }
    validate(rules);
    return rules;
}

ParseRuleSet builtin_rule_set(std::string_view tool_id) {
    for (const auto& [id, text] : detail::builtin_rule_texts()) {
        if (id == tool_id) {
            auto rules = Json::parse(text).get<ParseRuleSet>();
            validate(rules);
            return rules;
        }
    }
    fail(ErrorKind::ConfigError, fmt::format("no built-in parse rules for tool '{}'", tool_id));
}

ParseRuleSet resolve_rule_set(std::string_view tool_id, const fs::path& rules_dir) {
    if (!rules_dir.empty()) {
        const auto file = rules_dir / (std::string(tool_id) + ".json");
        std::error_code ec;
        if (fs::is_regular_file(file, ec)) return load_rule_set(file);
    }
    return builtin_rule_set(tool_id);
}

// ---------------------------------------------------------------------------
// Parsers

namespace {

template <typename Fn>
void for_each_line(std::string_view raw, Fn&& fn) {
    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto eol = raw.find('\n', pos);
        if (eol == std::string_view::npos) eol = raw.size();
        auto line = raw.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        fn(line);
        pos = eol + 1;
    }
}

const std::map<std::string, std::string>* first_match(
    const std::vector<MatchRule>& rules, std::string_view line,
    std::optional<std::map<std::string, std::string>>& storage) {
    for (const auto& rule : rules) {
        storage = rule.match(line);
        if (storage) return &*storage;
    }
    return nullptr;
}

bool matches_any(const std::vector<MatchRule>& rules, std::string_view line) {
    std::optional<std::map<std::string, std::string>> storage;
    return first_match(rules, line, storage) != nullptr;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
    Int value{};
    const auto* begin = text.data();
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

std::string get(const std::map<std::string, std::string>& values, const char* key,
                std::string fallback = {}) {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

std::string trimmed(std::string_view text) {
    const auto first = text.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t");
    return std::string(text.substr(first, last - first + 1));
}

bool contains_error_word(std::string_view line) {
    static constexpr std::string_view kWord = "error";
    if (line.size() < kWord.size()) return false;
    for (std::size_t i = 0; i + kWord.size() <= line.size(); ++i) {
        bool same = true;
        for (std::size_t k = 0; k < kWord.size() && same; ++k) {
            same = std::tolower(static_cast<unsigned char>(line[i + k])) == kWord[k];
        }
        if (same) return true;
    }
    return false;
}

}  // namespace

std::vector<Diagnostic> parse_compile_log(const ParseRuleSet& rules, std::string_view raw,
                                          bool exit_ok) {
    std::vector<Diagnostic> diagnostics;
    std::optional<std::map<std::string, std::string>> storage;
    for_each_line(raw, [&](std::string_view line) {
        if (trimmed(line).empty() || matches_any(rules.ignore_patterns, line)) return;
        if (const auto* values = first_match(rules.error_patterns, line, storage)) {
            Diagnostic d;
            d.file = get(*values, "file");
            d.message = get(*values, "message");
            if (d.message.empty()) d.message = trimmed(line);
            d.severity = Severity::Error;
            if (auto s = get(*values, "severity"); !s.empty()) {
                d.severity = s == "warning" ? Severity::Warning : Severity::Error;
            }
            d.category = DiagnosticCategory::Other;
            if (auto c = get(*values, "category"); c == "syntax") {
                d.category = DiagnosticCategory::Syntax;
            } else if (c == "elaboration") {
                d.category = DiagnosticCategory::Elaboration;
            }
            if (auto text = get(*values, "line"); !text.empty()) {
                auto number = parse_int<int>(text);
                if (number && *number > 0) {
                    d.line = number;
                } else {
                    // keep the raw information but do not trust the location
                    d.category = DiagnosticCategory::Other;
                }
            }
            diagnostics.push_back(std::move(d));
            return;
        }
        if (contains_error_word(line)) {
            diagnostics.push_back(
                Diagnostic{"", std::nullopt, Severity::Error, DiagnosticCategory::Other,
                           trimmed(line)});
        }
    });
    const bool any_error = std::any_of(diagnostics.begin(), diagnostics.end(), [](const auto& d) {
        return d.severity == Severity::Error;
    });
    if (!exit_ok && !any_error) {
        diagnostics.push_back(Diagnostic{"", std::nullopt, Severity::Error,
                                         DiagnosticCategory::Other,
                                         "compiler reported failure without a recognizable error"});
    }
    return diagnostics;
}

SimReport parse_sim_log(const ParseRuleSet& rules, std::string_view raw, bool timed_out) {
    SimReport report;
    report.raw_log = std::string(raw);
    report.timed_out = timed_out;
    std::optional<std::map<std::string, std::string>> storage;
    for_each_line(raw, [&](std::string_view line) {
        if (trimmed(line).empty() || matches_any(rules.ignore_patterns, line)) return;
        if (const auto* values = first_match(rules.assertion_patterns, line, storage)) {
            FailedAssertion failure;
            failure.label = get(*values, "label", "assertion");
            if (failure.label.empty()) failure.label = "assertion";
            failure.message = get(*values, "message");
            if (failure.message.empty()) failure.message = trimmed(line);
            if (auto t = get(*values, "time"); !t.empty()) {
                failure.sim_time = parse_int<std::uint64_t>(t);
            }
            report.failed_assertions.push_back(std::move(failure));
            return;
        }
        if (const auto* values = first_match(rules.mismatch_patterns, line, storage)) {
            const auto count = get(*values, "count");
            const auto parsed = count.empty() ? std::optional<std::uint64_t>(1)
                                              : parse_int<std::uint64_t>(count);
            // saturate instead of wrapping on absurd counts
            const auto add = parsed.value_or(1);
            report.mismatch_count = add > UINT64_MAX - report.mismatch_count
                                        ? UINT64_MAX
                                        : report.mismatch_count + add;
        }
    });
    report.passed =
        report.failed_assertions.empty() && report.mismatch_count == 0 && !report.timed_out;
    return report;
}

std::optional<CoverageMetric> normalize_metric_name(std::string_view name) {
    std::string lower;
    for (char c : name) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!lower.empty() && lower.back() != ' ') {
            lower.push_back(' ');
        }
    }
    while (!lower.empty() && lower.back() == ' ') lower.pop_back();
    if (lower == "line" || lower == "lines" || lower == "statement") return CoverageMetric::Line;
    if (lower == "toggle") return CoverageMetric::Toggle;
    if (lower == "combinational" || lower == "combinational logic" || lower == "comb" ||
        lower == "logic" || lower == "expression") {
        return CoverageMetric::Combinational;
    }
    if (lower == "fsm" || lower == "finite state machine" || lower == "state machine") {
        return CoverageMetric::Fsm;
    }
    return std::nullopt;
}

CoverageReport parse_coverage_report(const ParseRuleSet& rules, std::string_view raw) {
    std::map<CoverageMetric, MetricCount> metrics;
    std::optional<CoverageMetric> section;
    bool in_unknown_section = false;
    std::size_t rows = 0;
    std::optional<std::map<std::string, std::string>> storage;
    for_each_line(raw, [&](std::string_view line) {
        if (matches_any(rules.ignore_patterns, line)) return;
        if (const auto* values = first_match(rules.coverage_section_patterns, line, storage)) {
            section = normalize_metric_name(get(*values, "metric"));
            in_unknown_section = !section.has_value();
            return;
        }
        const auto* values = first_match(rules.coverage_row_patterns, line, storage);
        if (values == nullptr) return;
        std::optional<CoverageMetric> metric = section;
        if (auto m = get(*values, "metric"); !m.empty()) metric = normalize_metric_name(m);
        if (!metric) {
            // rows of sections we do not track (assertion, memory) still count
            // as recognized output
            if (in_unknown_section) ++rows;
            return;
        }
        auto covered = parse_int<std::uint64_t>(get(*values, "covered"));
        auto total = parse_int<std::uint64_t>(get(*values, "total"));
        if (!covered || !total) return;
        if (auto c2 = get(*values, "covered2"); !c2.empty()) {
            auto extra_covered = parse_int<std::uint64_t>(c2);
            auto extra_total = parse_int<std::uint64_t>(get(*values, "total2"));
            if (!extra_covered || !extra_total) return;
            *covered += *extra_covered;
            *total += *extra_total;
        }
        if (*covered > *total) return;
        metrics[*metric] = MetricCount{*covered, *total};
        ++rows;
    });
    if (rows == 0 && !trimmed(raw).empty()) {
        fail(ErrorKind::ParseFailure,
             fmt::format("no coverage rows recognized for tool '{}'", rules.tool_id));
    }
    return CoverageReport::from_metrics(std::move(metrics), std::string(raw));
}

// ---------------------------------------------------------------------------
// Distillation

namespace {

std::string location(const Diagnostic& d) {
    std::string file = d.file.empty() ? "(tool)" : d.file;
    if (d.line) return fmt::format("{}:{}", file, *d.line);
    return file;
}

std::string percent(double ratio) { return fmt::format("{:.2f}%", ratio * 100.0); }

ReviewIssue diagnostic_issue(const Diagnostic& d) {
    ReviewIssue issue;
    issue.origin = d;
    issue.explanation = fmt::format("{} {} at {}: {}", to_string(d.category), to_string(d.severity),
                                    location(d), d.message);
    switch (d.category) {
        case DiagnosticCategory::Syntax:
            issue.focus_hint = fmt::format(
                "Check the statement ending at or just before {} for a missing ';', an unbalanced "
                "begin/end or parenthesis, or a misspelled keyword.",
                location(d));
            break;
        case DiagnosticCategory::Elaboration:
            issue.focus_hint = fmt::format(
                "Fix the declaration, port connection or module reference named in '{}' at {}.",
                d.message, location(d));
            break;
        case DiagnosticCategory::Other:
            issue.focus_hint = fmt::format("Resolve the tool complaint '{}'.", d.message);
            break;
    }
    if (d.severity == Severity::Warning) {
        issue.focus_hint = fmt::format("Warning only: consider '{}' at {}.", d.message, location(d));
    }
    return issue;
}

ReviewIssue assertion_issue(const FailedAssertion& a) {
    ReviewIssue issue;
    issue.origin = a;
    const auto when = a.sim_time ? fmt::format("time {}", *a.sim_time) : std::string("unknown time");
    issue.explanation = fmt::format("check '{}' failed at {}: {}", a.label, when, a.message);
    issue.focus_hint = fmt::format(
        "Trace the logic that drives the checked signal at {} and correct the behavior behind "
        "'{}'.",
        when, a.message);
    return issue;
}

ReviewIssue condition_issue(SimCondition condition, const SimReport& sim) {
    ReviewIssue issue;
    issue.origin = condition;
    if (condition == SimCondition::Timeout) {
        issue.explanation = "simulation did not finish before the timeout";
        issue.focus_hint =
            "Make sure the testbench ends with $finish and that no unbounded loop or "
            "combinational feedback stalls simulation time.";
    } else {
        issue.explanation = fmt::format("simulation reported {} output mismatch(es)",
                                        sim.mismatch_count);
        issue.focus_hint =
            "Compare each output against the intended behavior for the stimulus that "
            "produced the first mismatch.";
    }
    return issue;
}

std::string_view metric_advice(CoverageMetric metric) {
    switch (metric) {
        case CoverageMetric::Line:
            return "add stimulus that reaches the unexecuted statements and branches";
        case CoverageMetric::Toggle:
            return "drive every input and internal bit through both 0->1 and 1->0 transitions";
        case CoverageMetric::Combinational:
            return "apply operand combinations that flip each condition of the logic expressions";
        case CoverageMetric::Fsm:
            return "steer the state machine through every state and transition";
    }
    return "";
}

ReviewIssue coverage_issue(CoverageMetric metric, const CoverageReport& coverage,
                           double threshold) {
    const auto& count = coverage.metrics.at(metric);
    const double ratio = count.total == 0
                             ? 1.0
                             : static_cast<double>(count.covered) / static_cast<double>(count.total);
    ReviewIssue issue;
    issue.origin = metric;
    issue.explanation = fmt::format(
        "{} coverage is {}/{} ({}); aggregate coverage {} is below the {} target", to_string(metric),
        count.covered, count.total, percent(ratio), percent(coverage.aggregate), percent(threshold));
    issue.focus_hint =
        fmt::format("Extend the testbench: {}.", metric_advice(metric));
    return issue;
}

int severity_rank(Severity s) { return s == Severity::Error ? 0 : 1; }

}  // namespace

std::optional<CoverageMetric> weakest_metric(const CoverageReport& coverage) {
    std::optional<CoverageMetric> weakest;
    double lowest = 2.0;
    for (auto metric : kAllCoverageMetrics) {
        auto it = coverage.metrics.find(metric);
        if (it == coverage.metrics.end() || it->second.total == 0) continue;
        const double ratio =
            static_cast<double>(it->second.covered) / static_cast<double>(it->second.total);
        if (ratio < lowest) {
            lowest = ratio;
            weakest = metric;
        }
    }
    return weakest;
}

ReviewFeedback distill(const std::optional<CompileReport>& compile,
                       const std::optional<SimReport>& sim,
                       const std::optional<CoverageReport>& coverage,
                       const DistillOptions& options) {
    if (options.cap == 0) fail(ErrorKind::PreconditionViolation, "issue cap must be positive");
    ReviewFeedback feedback;

    if (compile && compile->error_count() > 0) {
        feedback.phase = RepairPhase::SyntaxRepair;
        std::vector<Diagnostic> unique;
        std::set<std::tuple<std::string, std::optional<int>, std::string>> seen;
        for (const auto& d : compile->diagnostics) {
            if (seen.emplace(d.file, d.line, d.message).second) unique.push_back(d);
        }
        std::stable_sort(unique.begin(), unique.end(), [](const Diagnostic& a, const Diagnostic& b) {
            // located diagnostics before file-level ones
            const auto key = [](const Diagnostic& d) {
                return std::make_tuple(severity_rank(d.severity), d.file, !d.line.has_value(),
                                       d.line.value_or(0));
            };
            return key(a) < key(b);
        });
        for (const auto& d : unique) feedback.issues.push_back(diagnostic_issue(d));
    } else if (sim && !sim->passed) {
        feedback.phase = RepairPhase::FunctionalRepair;
        if (sim->timed_out) feedback.issues.push_back(condition_issue(SimCondition::Timeout, *sim));
        std::vector<FailedAssertion> unique;
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& a : sim->failed_assertions) {
            if (seen.emplace(a.label, a.message).second) unique.push_back(a);
        }
        std::stable_sort(unique.begin(), unique.end(),
                         [](const FailedAssertion& a, const FailedAssertion& b) {
                             return std::make_tuple(!a.sim_time.has_value(), a.sim_time.value_or(0)) <
                                    std::make_tuple(!b.sim_time.has_value(), b.sim_time.value_or(0));
                         });
        for (const auto& a : unique) feedback.issues.push_back(assertion_issue(a));
        if (sim->mismatch_count > 0) {
            feedback.issues.push_back(condition_issue(SimCondition::Mismatches, *sim));
        }
    } else if (coverage && coverage->aggregate < options.coverage_threshold) {
        feedback.phase = RepairPhase::CoverageImprovement;
        if (auto metric = weakest_metric(*coverage)) {
            feedback.issues.push_back(coverage_issue(*metric, *coverage, options.coverage_threshold));
        }
    }

    if (feedback.issues.empty()) {
        fail(ErrorKind::NothingToDistill, "all supplied reports are clean");
    }
    if (feedback.issues.size() > options.cap) feedback.issues.resize(options.cap);
    return feedback;
}

std::string describe_origin(const IssueOrigin& origin) {
    return std::visit(
        [](const auto& o) -> std::string {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Diagnostic>) {
                return fmt::format("{} ({} {})", location(o), to_string(o.category),
                                   to_string(o.severity));
            } else if constexpr (std::is_same_v<T, FailedAssertion>) {
                return o.sim_time ? fmt::format("{} @ {}", o.label, *o.sim_time) : o.label;
            } else if constexpr (std::is_same_v<T, CoverageMetric>) {
                return fmt::format("{} coverage", to_string(o));
            } else {
                return fmt::format("simulation {}", to_string(o));
            }
        },
        origin);
}

std::string log_excerpt(std::string_view raw, std::size_t max_bytes) {
    if (raw.size() <= max_bytes) return std::string(raw);
    auto tail = raw.substr(raw.size() - max_bytes);
    if (auto nl = tail.find('\n'); nl != std::string_view::npos && nl + 1 < tail.size()) {
        tail.remove_prefix(nl + 1);
    }
    return fmt::format("[... {} earlier bytes omitted ...]\n{}", raw.size() - tail.size(), tail);
}

namespace {

std::string_view phase_title(RepairPhase phase) {
    switch (phase) {
        case RepairPhase::SyntaxRepair: return "syntax repair";
        case RepairPhase::FunctionalRepair: return "functional repair";
        case RepairPhase::CoverageImprovement: return "coverage improvement";
    }
    return "";
}

std::string_view phase_goal(RepairPhase phase) {
    switch (phase) {
        case RepairPhase::SyntaxRepair:
            return "make the code compile with zero errors without changing its intended behavior.";
        case RepairPhase::FunctionalRepair:
            return "make the design behave as specified so that every testbench check passes.";
        case RepairPhase::CoverageImprovement:
            return "raise code coverage by strengthening the testbench stimulus; keep the design "
                   "unchanged unless a check exposes a real bug.";
    }
    return "";
}

std::string_view closing_instruction(RepairPhase phase) {
    switch (phase) {
        case RepairPhase::SyntaxRepair:
            return "Reply with the complete corrected source file(s) in ```verilog fenced blocks, "
                   "design first and testbench second when both are needed. Keep all module names "
                   "unchanged.";
        case RepairPhase::FunctionalRepair:
            return "Reply with the complete revised design in a ```verilog fenced block. Include the "
                   "full testbench in a second block only if it is wrong. Keep all module names "
                   "unchanged.";
        case RepairPhase::CoverageImprovement:
            return "Reply with the complete revised testbench in a ```verilog fenced block. Keep the "
                   "testbench self-checking, printing \"ALL TESTS PASSED\" on success, and keep all "
                   "module names unchanged.";
    }
    return "";
}

void append_numbered_issues(std::string& out, const ReviewFeedback& feedback) {
    int n = 0;
    for (const auto& issue : feedback.issues) {
        out += fmt::format("{}. {}\n   Focus: {}\n", ++n, issue.explanation, issue.focus_hint);
    }
}

bool mentions_testbench(const ReviewFeedback& feedback) {
    return std::any_of(feedback.issues.begin(), feedback.issues.end(), [](const ReviewIssue& i) {
        const auto* d = std::get_if<Diagnostic>(&i.origin);
        return d != nullptr && d->file == kTestbenchFileName;
    });
}

}  // namespace

std::string render_analysis_request(const ReviewFeedback& feedback, std::string_view raw_log,
                                    std::size_t excerpt_bytes) {
    std::string out;
    out += fmt::format("Tool output from the {} stage was distilled into these issues:\n\n",
                       phase_title(feedback.phase));
    append_numbered_issues(out, feedback);
    out += "\nLog excerpt:\n```text\n";
    out += log_excerpt(raw_log, excerpt_bytes);
    if (!out.ends_with('\n')) out += '\n';
    out += "```\n\nExplain the most likely root cause of each issue and the concrete change that "
           "fixes it. Be brief and do not rewrite the whole code.\n";
    return out;
}

std::string render_review_prompt(const ReviewFeedback& feedback, const RtlBundle& current_bundle,
                                 const std::optional<std::string>& agent_analysis) {
    if (feedback.issues.empty()) {
        fail(ErrorKind::PreconditionViolation, "review prompt needs at least one issue");
    }
    std::string out;
    out += fmt::format("## Review feedback: {}\n\n", phase_title(feedback.phase));
    out += fmt::format("Goal: {}\n\n", phase_goal(feedback.phase));
    out += "### Issues\n";
    append_numbered_issues(out, feedback);
    out += fmt::format("\n### Current design ({})\n```verilog\n{}", kDesignFileName,
                       current_bundle.design_source);
    if (!out.ends_with('\n')) out += '\n';
    out += "```\n";
    const bool show_testbench =
        !current_bundle.testbench_source.empty() &&
        (feedback.phase != RepairPhase::SyntaxRepair || mentions_testbench(feedback));
    if (show_testbench) {
        out += fmt::format("\n### Current testbench ({})\n```verilog\n{}", kTestbenchFileName,
                           current_bundle.testbench_source);
        if (!out.ends_with('\n')) out += '\n';
        out += "```\n";
    }
    if (agent_analysis && !agent_analysis->empty()) {
        out += "\n### Reviewer analysis\n";
        out += *agent_analysis;
        if (!out.ends_with('\n')) out += '\n';
    }
    out += "\n";
    out += closing_instruction(feedback.phase);
    out += "\n";
    return out;
}

}  // namespace rtlforge
