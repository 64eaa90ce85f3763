#include "rtlforge/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "rtlforge/error.hpp"
#include "rtlforge/gateway.hpp"
#include "rtlforge/hdl_text.hpp"
#include "rtlforge/process.hpp"

namespace fs = std::filesystem;

namespace rtlforge {

namespace {

const std::set<std::string>& known_placeholders() {
    static const std::set<std::string> names{"design", "testbench", "out",
                                             "workdir", "top", "dut_path"};
    return names;
}

void check_placeholders(const CommandSteps& steps, std::string_view stage, bool required) {
    if (required && steps.empty()) {
        fail(ErrorKind::ConfigError, fmt::format("profile has no {} command", stage));
    }
    for (const auto& argv : steps) {
        if (argv.empty() || argv.front().empty()) {
            fail(ErrorKind::ConfigError, fmt::format("empty {} command", stage));
        }
        for (const auto& arg : argv) {
            std::size_t pos = 0;
            while ((pos = arg.find('{', pos)) != std::string::npos) {
                const auto close = arg.find('}', pos);
                if (close == std::string::npos) {
                    fail(ErrorKind::ConfigError,
                         fmt::format("unterminated placeholder in {} argument '{}'", stage, arg));
                }
                const std::string name = arg.substr(pos + 1, close - pos - 1);
                if (!known_placeholders().contains(name)) {
                    fail(ErrorKind::ConfigError,
                         fmt::format("unknown placeholder '{{{}}}' in {} command", name, stage));
                }
                pos = close + 1;
            }
        }
    }
}

struct Substitutions {
    std::map<std::string, std::string> values;
};

Substitutions substitutions_for(const ToolProfile& profile, const RtlBundle& bundle,
                                const Workspace& ws) {
    Substitutions s;
    s.values["design"] = std::string(kDesignFileName);
    s.values["testbench"] = bundle.testbench_source.empty() ? "" : std::string(kTestbenchFileName);
    s.values["out"] = profile.compiled_file;
    s.values["workdir"] = ws.root.string();
    s.values["top"] = bundle.top_module;
    std::string dut_path = bundle.top_module;
    if (!bundle.testbench_source.empty()) {
        // The testbench is the first module of its source.
        const auto modules = declared_modules(bundle.testbench_source);
        const auto instance = find_instance_name(bundle.testbench_source, bundle.top_module);
        if (!modules.empty() && instance) dut_path = modules.front() + "." + *instance;
    }
    s.values["dut_path"] = dut_path;
    return s;
}

std::vector<std::string> expand(const std::vector<std::string>& argv, const Substitutions& subs) {
    std::vector<std::string> out;
    for (const auto& arg : argv) {
        std::string result;
        std::size_t pos = 0;
        while (pos < arg.size()) {
            const auto open = arg.find('{', pos);
            if (open == std::string::npos) {
                result.append(arg, pos);
                break;
            }
            const auto close = arg.find('}', open);
            result.append(arg, pos, open - pos);
            const auto it = subs.values.find(arg.substr(open + 1, close - open - 1));
            if (it != subs.values.end()) result += it->second;
            pos = close + 1;
        }
        if (!result.empty()) out.push_back(std::move(result));
    }
    return out;
}

struct StageResult {
    std::string log;
    bool timed_out = false;
    bool ok = true;
    int exit_code = 0;
    double wall_seconds = 0.0;
};

// Runs the steps of one stage until one fails; all steps share one deadline.
StageResult run_stage(const ToolProfile& profile, const CommandSteps& steps,
                      const Substitutions& subs, const Workspace& ws, int timeout_seconds) {
    StageResult result;
    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + std::chrono::seconds(timeout_seconds);
    for (const auto& step : steps) {
        ProcessRequest request;
        request.argv = expand(step, subs);
        request.workdir = ws.root;
        request.env_passthrough = profile.env_passthrough;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        request.timeout = std::max(left, std::chrono::milliseconds(1));
        const ProcessResult run = run_process(request);
        result.log += run.output;
        result.exit_code = run.exit_code;
        if (run.timed_out) {
            result.timed_out = true;
            result.ok = false;
            break;
        }
        if (!run.ok()) {
            result.ok = false;
            break;
        }
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void write_sources(const RtlBundle& bundle, const Workspace& ws) {
    write_text_file(ws.root / kDesignFileName, bundle.design_source);
    const fs::path tb = ws.root / kTestbenchFileName;
    if (bundle.testbench_source.empty()) {
        std::error_code ec;
        fs::remove(tb, ec);
    } else {
        write_text_file(tb, bundle.testbench_source);
    }
}

CommandSteps steps_from_json(const Json& j, std::string_view key) {
    CommandSteps steps;
    if (!j.contains(std::string(key))) return steps;
    const Json& value = j.at(std::string(key));
    if (!value.is_array()) {
        fail(ErrorKind::ConfigError, fmt::format("'{}' must be an argument vector", key));
    }
    if (!value.empty() && value.front().is_string()) {
        steps.push_back(value.get<std::vector<std::string>>());
    } else {
        steps = value.get<CommandSteps>();
    }
    return steps;
}

fs::path env_or(const char* name, const char* fallback) {
    if (const char* value = std::getenv(name); value && *value) return value;
    return fallback;
}

}  // namespace

void validate(const ToolProfile& profile) {
    if (profile.tool_id.empty()) fail(ErrorKind::ConfigError, "profile has no tool_id");
    check_placeholders(profile.compile_cmd, "compile", true);
    check_placeholders(profile.sim_cmd, "sim", true);
    check_placeholders(profile.coverage_cmd, "coverage", false);
    if (profile.compile_timeout_seconds <= 0 || profile.sim_timeout_seconds <= 0 ||
        profile.coverage_timeout_seconds <= 0) {
        fail(ErrorKind::ConfigError, "profile timeouts must be positive");
    }
    if (!is_filesystem_safe(profile.compiled_file) || !is_filesystem_safe(profile.dump_file)) {
        fail(ErrorKind::ConfigError, "compiled_file and dump_file must be plain file names");
    }
    validate(profile.rules);
}

void to_json(Json& j, const ToolProfile& v) {
    j = Json::object();
    j["tool_id"] = v.tool_id;
    j["compile_cmd"] = v.compile_cmd;
    j["sim_cmd"] = v.sim_cmd;
    j["coverage_cmd"] = v.coverage_cmd;
    j["compile_timeout_seconds"] = v.compile_timeout_seconds;
    j["sim_timeout_seconds"] = v.sim_timeout_seconds;
    j["coverage_timeout_seconds"] = v.coverage_timeout_seconds;
    j["compiled_file"] = v.compiled_file;
    j["dump_file"] = v.dump_file;
    j["env_passthrough"] = v.env_passthrough;
    j["rules"] = v.rules;
}

void from_json(const Json& j, ToolProfile& v) {
    v = ToolProfile{};
    v.tool_id = j.at("tool_id").get<std::string>();
    v.compile_cmd = steps_from_json(j, "compile_cmd");
    v.sim_cmd = steps_from_json(j, "sim_cmd");
    v.coverage_cmd = steps_from_json(j, "coverage_cmd");
    v.compile_timeout_seconds = j.value("compile_timeout_seconds", v.compile_timeout_seconds);
    v.sim_timeout_seconds = j.value("sim_timeout_seconds", v.sim_timeout_seconds);
    v.coverage_timeout_seconds = j.value("coverage_timeout_seconds", v.coverage_timeout_seconds);
    v.compiled_file = j.value("compiled_file", v.compiled_file);
    v.dump_file = j.value("dump_file", v.dump_file);
    if (j.contains("env_passthrough")) {
        v.env_passthrough = j.at("env_passthrough").get<std::vector<std::string>>();
    }
    if (!j.contains("rules")) {
        v.rules = resolve_rule_set(v.tool_id, default_rules_dir());
    } else if (j.at("rules").is_string()) {
        v.rules = resolve_rule_set(j.at("rules").get<std::string>(), default_rules_dir());
    } else {
        v.rules = j.at("rules").get<ParseRuleSet>();
    }
}

ToolProfile icarus_profile() {
    ToolProfile p;
    p.tool_id = "icarus";
    p.compile_cmd = {{"iverilog", "-g2012", "-Wall", "-o", "{out}", "{design}", "{testbench}"}};
    p.sim_cmd = {{"vvp", "-n", "{out}"}};
    p.coverage_cmd = {
        {"covered", "score", "-t", "{top}", "-i", "{dut_path}", "-v", "{design}", "-vcd",
         "dump.vcd", "-o", "cov.cdd"},
        {"covered", "report", "-m", "ltcf", "-d", "s", "cov.cdd"},
    };
    p.rules = resolve_rule_set("icarus", default_rules_dir());
    return p;
}

ToolProfile stub_profile(const fs::path& tools_dir) {
    ToolProfile p;
    p.tool_id = "stub";
    const std::string dir = fs::absolute(tools_dir).string();
    p.compile_cmd = {{dir + "/fake_iverilog.py", "-o", "{out}", "{design}", "{testbench}"}};
    p.sim_cmd = {{dir + "/fake_vvp.py", "-n", "{out}"}};
    p.coverage_cmd = {{dir + "/fake_covered.py", "report", "-t", "{top}", "-vcd", "dump.vcd",
                       "{design}", "{testbench}"}};
    p.compile_timeout_seconds = 10;
    p.sim_timeout_seconds = 10;
    p.coverage_timeout_seconds = 10;
    p.rules = resolve_rule_set("stub", default_rules_dir());
    return p;
}

ToolProfile resolve_profile(const std::string& name_or_path, const fs::path& stub_tools_dir) {
    if (name_or_path == "icarus") return icarus_profile();
    if (name_or_path == "stub") return stub_profile(stub_tools_dir);
    if (!fs::is_regular_file(name_or_path)) {
        fail(ErrorKind::ConfigError,
             fmt::format("unknown tool profile '{}' (expected icarus, stub or a JSON file)",
                         name_or_path));
    }
    ToolProfile profile;
    try {
        profile = Json::parse(read_text_file(name_or_path)).get<ToolProfile>();
    } catch (const Json::exception& e) {
        fail(ErrorKind::ConfigError, fmt::format("bad profile {}: {}", name_or_path, e.what()));
    }
    validate(profile);
    return profile;
}

fs::path default_stub_tools_dir() {
    return env_or("RTLFORGE_STUB_TOOLS_DIR", RTLFORGE_DEFAULT_STUB_TOOLS_DIR);
}

fs::path default_rules_dir() { return env_or("RTLFORGE_RULES_DIR", RTLFORGE_DEFAULT_RULES_DIR); }

fs::path Workspace::subdir(const std::string& name) const {
    const fs::path dir = root / name;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::IoError, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    return dir;
}

Workspace make_workspace(const std::string& task_id, const fs::path& base_dir) {
    if (!is_filesystem_safe(task_id)) {
        fail(ErrorKind::PreconditionViolation,
             fmt::format("task id '{}' is not a safe directory name", task_id));
    }
    const fs::path task_dir = fs::absolute(base_dir) / task_id;
    std::error_code ec;
    fs::create_directories(task_dir, ec);
    if (ec) {
        fail(ErrorKind::IoError,
             fmt::format("cannot create {}: {}", task_dir.string(), ec.message()));
    }
    int highest = 0;
    for (const auto& entry : fs::directory_iterator(task_dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("run_", 0) != 0) continue;
        try {
            std::size_t used = 0;
            const int n = std::stoi(name.substr(4), &used);
            if (used == name.size() - 4) highest = std::max(highest, n);
        } catch (const std::exception&) {
        }
    }
    // create_directory reports false when another run took the name first.
    for (int n = highest + 1;; ++n) {
        const fs::path root = task_dir / fmt::format("run_{:03d}", n);
        if (fs::create_directory(root, ec)) return Workspace{root, task_id};
        if (ec) {
            fail(ErrorKind::IoError, fmt::format("cannot create {}: {}", root.string(), ec.message()));
        }
    }
}

CompileReport compile(const ToolProfile& profile, const RtlBundle& bundle, const Workspace& ws) {
    if (bundle.design_source.empty()) {
        fail(ErrorKind::PreconditionViolation, "design source is empty");
    }
    write_sources(bundle, ws);
    std::error_code ec;
    fs::remove(ws.root / profile.compiled_file, ec);

    const StageResult stage = run_stage(profile, profile.compile_cmd,
                                        substitutions_for(profile, bundle, ws), ws,
                                        profile.compile_timeout_seconds);
    write_text_file(ws.root / "compile.log", stage.log);

    CompileReport report;
    report.tool_id = profile.tool_id;
    report.raw_log = stage.log;
    report.wall_seconds = stage.wall_seconds;
    report.exit_ok = stage.ok;
    report.diagnostics = parse_compile_log(profile.rules, stage.log, stage.ok);
    if (stage.timed_out) {
        report.diagnostics.push_back(Diagnostic{
            "", std::nullopt, Severity::Error, DiagnosticCategory::Other,
            fmt::format("compilation timed out after {} s", profile.compile_timeout_seconds)});
    }
    return report;
}

SimReport simulate(const ToolProfile& profile, const RtlBundle& bundle, const Workspace& ws) {
    if (!fs::exists(ws.root / profile.compiled_file)) {
        fail(ErrorKind::MissingArtifact,
             fmt::format("no compiled object {} in {}", profile.compiled_file, ws.root.string()));
    }
    std::error_code ec;
    fs::remove(ws.root / profile.dump_file, ec);

    const StageResult stage = run_stage(profile, profile.sim_cmd,
                                        substitutions_for(profile, bundle, ws), ws,
                                        profile.sim_timeout_seconds);
    write_text_file(ws.root / "sim.log", stage.log);

    SimReport report = parse_sim_log(profile.rules, stage.log, stage.timed_out);
    if (!stage.timed_out && !stage.ok && report.failed_assertions.empty()) {
        report.failed_assertions.push_back(FailedAssertion{
            "exit_status", std::nullopt,
            fmt::format("simulator exited with status {}", stage.exit_code)});
        report.passed = false;
    }
    return report;
}

CoverageReport measure_coverage(const ToolProfile& profile, const RtlBundle& bundle,
                                const Workspace& ws) {
    if (profile.coverage_cmd.empty()) {
        fail(ErrorKind::ConfigError,
             fmt::format("profile '{}' has no coverage command", profile.tool_id));
    }
    if (!fs::exists(ws.root / profile.dump_file)) {
        fail(ErrorKind::MissingArtifact,
             fmt::format("no dump file {} in {}", profile.dump_file, ws.root.string()));
    }
    const StageResult stage = run_stage(profile, profile.coverage_cmd,
                                        substitutions_for(profile, bundle, ws), ws,
                                        profile.coverage_timeout_seconds);
    write_text_file(ws.root / "coverage.log", stage.log);
    if (stage.timed_out) {
        fail(ErrorKind::ParseFailure,
             fmt::format("coverage tool timed out after {} s", profile.coverage_timeout_seconds));
    }
    if (!stage.ok) {
        fail(ErrorKind::ParseFailure,
             fmt::format("coverage tool exited with status {}", stage.exit_code));
    }
    if (stage.log.find_first_not_of(" \t\r\n") == std::string::npos) {
        fail(ErrorKind::ParseFailure, "coverage tool produced no output");
    }
    return parse_coverage_report(profile.rules, stage.log);
}

ToolProfile with_timeout_cap(ToolProfile profile, int cap_seconds) {
    if (cap_seconds <= 0) return profile;
    profile.compile_timeout_seconds = std::min(profile.compile_timeout_seconds, cap_seconds);
    profile.sim_timeout_seconds = std::min(profile.sim_timeout_seconds, cap_seconds);
    profile.coverage_timeout_seconds = std::min(profile.coverage_timeout_seconds, cap_seconds);
    return profile;
}

}  // namespace rtlforge
