#include "rtlforge/serialize.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rtlforge/error.hpp"

namespace rtlforge {

namespace {

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& value) {
    if (value) {
        j[key] = *value;
    } else {
        j[key] = nullptr;
    }
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->template get<T>();
}

template <typename Enum>
Enum get_enum(const Json& j, const char* key) {
    return enum_from_string<Enum>(j.at(key).get<std::string>());
}

}  // namespace

void to_json(Json& j, const DesignTask& v) {
    j = Json::object();
    j["task_id"] = v.task_id;
    j["user_prompt"] = v.user_prompt;
    j["case"] = to_string(v.prompt_case);
    put_optional(j, "provided_rtl", v.provided_rtl);
    put_optional(j, "golden_testbench", v.golden_testbench);
}

void from_json(const Json& j, DesignTask& v) {
    v.task_id = j.at("task_id").get<std::string>();
    v.user_prompt = j.at("user_prompt").get<std::string>();
    v.prompt_case = get_enum<PromptCase>(j, "case");
    v.provided_rtl = get_optional<std::string>(j, "provided_rtl");
    v.golden_testbench = get_optional<std::string>(j, "golden_testbench");
}

void to_json(Json& j, const RtlBundle& v) {
    j = Json::object();
    j["design_source"] = v.design_source;
    j["testbench_source"] = v.testbench_source;
    j["top_module"] = v.top_module;
}

void from_json(const Json& j, RtlBundle& v) {
    v.top_module = j.at("top_module").get<std::string>();
    v.design_source = j.at("design_source").get<std::string>();
    v.testbench_source = j.at("testbench_source").get<std::string>();
}

void to_json(Json& j, const Diagnostic& v) {
    j = Json::object();
    j["file"] = v.file;
    put_optional(j, "line", v.line);
    j["severity"] = to_string(v.severity);
    j["category"] = to_string(v.category);
    j["message"] = v.message;
}

void from_json(const Json& j, Diagnostic& v) {
    v.file = j.at("file").get<std::string>();
    v.line = get_optional<int>(j, "line");
    v.severity = get_enum<Severity>(j, "severity");
    v.category = get_enum<DiagnosticCategory>(j, "category");
    v.message = j.at("message").get<std::string>();
}

void to_json(Json& j, const CompileReport& v) {
    j = Json::object();
    j["tool_id"] = v.tool_id;
    j["exit_ok"] = v.exit_ok;
    j["error_count"] = v.error_count();
    j["wall_seconds"] = v.wall_seconds;
    j["diagnostics"] = v.diagnostics;
    j["raw_log"] = v.raw_log;
}

void from_json(const Json& j, CompileReport& v) {
    // error_count is derived, never read back
    v.tool_id = j.at("tool_id").get<std::string>();
    v.exit_ok = j.at("exit_ok").get<bool>();
    v.wall_seconds = j.at("wall_seconds").get<double>();
    v.diagnostics = j.at("diagnostics").get<std::vector<Diagnostic>>();
    v.raw_log = j.at("raw_log").get<std::string>();
}

void to_json(Json& j, const FailedAssertion& v) {
    j = Json::object();
    j["label"] = v.label;
    put_optional(j, "sim_time", v.sim_time);
    j["message"] = v.message;
}

void from_json(const Json& j, FailedAssertion& v) {
    v.label = j.at("label").get<std::string>();
    v.sim_time = get_optional<std::uint64_t>(j, "sim_time");
    v.message = j.at("message").get<std::string>();
}

void to_json(Json& j, const SimReport& v) {
    j = Json::object();
    j["passed"] = v.passed;
    j["timed_out"] = v.timed_out;
    j["mismatch_count"] = v.mismatch_count;
    j["failed_assertions"] = v.failed_assertions;
    j["raw_log"] = v.raw_log;
}

void from_json(const Json& j, SimReport& v) {
    v.passed = j.at("passed").get<bool>();
    v.timed_out = j.at("timed_out").get<bool>();
    v.mismatch_count = j.at("mismatch_count").get<std::uint64_t>();
    v.failed_assertions = j.at("failed_assertions").get<std::vector<FailedAssertion>>();
    v.raw_log = j.at("raw_log").get<std::string>();
}

void to_json(Json& j, const CoverageReport& v) {
    j = Json::object();
    Json metrics = Json::object();
    for (const auto& [metric, count] : v.metrics) {
        metrics[std::string(to_string(metric))] = Json{{"covered", count.covered},
                                                       {"total", count.total}};
    }
    j["metrics"] = std::move(metrics);
    j["aggregate"] = v.aggregate;
    j["raw_log"] = v.raw_log;
}

void from_json(const Json& j, CoverageReport& v) {
    v.metrics.clear();
    for (const auto& [name, count] : j.at("metrics").items()) {
        v.metrics[enum_from_string<CoverageMetric>(name)] =
            MetricCount{count.at("covered").get<std::uint64_t>(),
                        count.at("total").get<std::uint64_t>()};
    }
    v.aggregate = j.at("aggregate").get<double>();
    v.raw_log = j.value("raw_log", std::string{});
}

void to_json(Json& j, const ReviewIssue& v) {
    j = Json::object();
    Json origin = Json::object();
    std::visit(
        [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, Diagnostic>) {
                origin["kind"] = "diagnostic";
                origin["diagnostic"] = o;
            } else if constexpr (std::is_same_v<T, FailedAssertion>) {
                origin["kind"] = "assertion";
                origin["assertion"] = o;
            } else if constexpr (std::is_same_v<T, CoverageMetric>) {
                origin["kind"] = "coverage_metric";
                origin["metric"] = to_string(o);
            } else {
                origin["kind"] = "sim_condition";
                origin["condition"] = to_string(o);
            }
        },
        v.origin);
    j["origin"] = std::move(origin);
    j["explanation"] = v.explanation;
    j["focus_hint"] = v.focus_hint;
}

void from_json(const Json& j, ReviewIssue& v) {
    const Json& origin = j.at("origin");
    const auto kind = origin.at("kind").get<std::string>();
    if (kind == "diagnostic") {
        v.origin = origin.at("diagnostic").get<Diagnostic>();
    } else if (kind == "assertion") {
        v.origin = origin.at("assertion").get<FailedAssertion>();
    } else if (kind == "coverage_metric") {
        v.origin = get_enum<CoverageMetric>(origin, "metric");
    } else if (kind == "sim_condition") {
        v.origin = get_enum<SimCondition>(origin, "condition");
    } else {
        fail(ErrorKind::FormatError, fmt::format("unknown issue origin kind '{}'", kind));
    }
    v.explanation = j.at("explanation").get<std::string>();
    v.focus_hint = j.at("focus_hint").get<std::string>();
}

void to_json(Json& j, const ReviewFeedback& v) {
    j = Json::object();
    j["phase"] = to_string(v.phase);
    j["issues"] = v.issues;
}

void from_json(const Json& j, ReviewFeedback& v) {
    v.phase = get_enum<RepairPhase>(j, "phase");
    v.issues = j.at("issues").get<std::vector<ReviewIssue>>();
}

void to_json(Json& j, const Budget& v) {
    j = Json::object();
    j["max_iterations"] = v.max_iterations;
    j["max_agent_calls"] = v.max_agent_calls;
    j["tool_timeout_seconds"] = v.tool_timeout_seconds;
}

void from_json(const Json& j, Budget& v) {
    v.max_iterations = j.at("max_iterations").get<int>();
    v.max_agent_calls = j.at("max_agent_calls").get<int>();
    v.tool_timeout_seconds = j.at("tool_timeout_seconds").get<int>();
}

void to_json(Json& j, const IterationRecord& v) {
    j = Json::object();
    j["index"] = v.index;
    j["kind"] = to_string(v.kind);
    j["agent_calls"] = v.agent_calls;
    j["prompt_sent"] = v.prompt_sent;
    j["agent_response"] = v.agent_response;
    put_optional(j, "compile", v.compile);
    put_optional(j, "sim", v.sim);
    put_optional(j, "coverage", v.coverage);
    put_optional(j, "feedback", v.feedback);
}

void from_json(const Json& j, IterationRecord& v) {
    v.index = j.at("index").get<int>();
    v.kind = get_enum<IterationKind>(j, "kind");
    v.agent_calls = j.at("agent_calls").get<int>();
    v.prompt_sent = j.at("prompt_sent").get<std::string>();
    v.agent_response = j.at("agent_response").get<std::string>();
    v.compile = get_optional<CompileReport>(j, "compile");
    v.sim = get_optional<SimReport>(j, "sim");
    v.coverage = get_optional<CoverageReport>(j, "coverage");
    v.feedback = get_optional<ReviewFeedback>(j, "feedback");
}

void to_json(Json& j, const LoopOutcome& v) {
    j = Json::object();
    j["status"] = to_string(v.status);
    j["iterations_used"] = v.iterations_used;
    j["detail"] = v.detail;
    put_optional(j, "final_bundle", v.final_bundle);
    j["trace"] = v.trace;
}

void from_json(const Json& j, LoopOutcome& v) {
    v.status = get_enum<LoopStatus>(j, "status");
    v.iterations_used = j.at("iterations_used").get<int>();
    v.detail = j.value("detail", std::string{});
    v.final_bundle = get_optional<RtlBundle>(j, "final_bundle");
    v.trace = j.at("trace").get<std::vector<IterationRecord>>();
}

std::string canonical_dump(const Json& j) {
    // replace invalid UTF-8 so tool logs with stray bytes never abort a dump
    return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, fmt::format("cannot read {}", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) fail(ErrorKind::IoError, fmt::format("short write to {}", path.string()));
}

}  // namespace rtlforge
