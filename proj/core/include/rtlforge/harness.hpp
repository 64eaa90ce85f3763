#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rtlforge/distiller.hpp"
#include "rtlforge/model.hpp"
#include "rtlforge/serialize.hpp"

namespace rtlforge {

// One stage may need several commands (Covered scores, then reports).
using CommandSteps = std::vector<std::vector<std::string>>;

/// Command templates for one tool chain. Arguments may contain the
/// placeholders {design}, {testbench}, {out}, {workdir}, {top} and
/// {dut_path}; an argument that expands to nothing is dropped.
struct ToolProfile {
    std::string tool_id;
    CommandSteps compile_cmd;
    CommandSteps sim_cmd;
    CommandSteps coverage_cmd;
    int compile_timeout_seconds = 60;
    int sim_timeout_seconds = 120;
    int coverage_timeout_seconds = 60;
    std::string compiled_file = "sim.vvp";
    std::string dump_file = "dump.vcd";
    std::vector<std::string> env_passthrough;
    ParseRuleSet rules;
};

void validate(const ToolProfile& profile);
void to_json(Json& j, const ToolProfile& v);
/// Reads a profile; `rules` may name a built-in rule set or be inline.
void from_json(const Json& j, ToolProfile& v);

ToolProfile icarus_profile();
/// Profile backed by the fake tools shipped in tools/stub.
ToolProfile stub_profile(const std::filesystem::path& tools_dir);
/// "icarus", "stub", or a path to a profile JSON file.
ToolProfile resolve_profile(const std::string& name_or_path,
                            const std::filesystem::path& stub_tools_dir);

/// Directory of the stub tools in this build tree or install.
std::filesystem::path default_stub_tools_dir();
std::filesystem::path default_rules_dir();

struct Workspace {
    std::filesystem::path root;
    std::string task_id;

    /// Creates (if needed) and returns root/name.
    std::filesystem::path subdir(const std::string& name) const;
};

/// Creates base_dir/task_id/run_NNN with the next free counter value.
Workspace make_workspace(const std::string& task_id, const std::filesystem::path& base_dir);

/// Writes the bundle sources into ws and runs the compile steps. Timeouts
/// come back as exit_ok = false with a synthesized diagnostic.
CompileReport compile(const ToolProfile& profile, const RtlBundle& bundle, const Workspace& ws);

/// Runs the simulator on the compiled object left by compile().
SimReport simulate(const ToolProfile& profile, const RtlBundle& bundle, const Workspace& ws);

/// Scores the dump file left by simulate(). Throws ParseFailure when the
/// tool output is unrecognizable; the raw log stays in ws/coverage.log.
CoverageReport measure_coverage(const ToolProfile& profile, const RtlBundle& bundle,
                                const Workspace& ws);

/// Copy of `profile` whose stage timeouts do not exceed `cap_seconds`.
ToolProfile with_timeout_cap(ToolProfile profile, int cap_seconds);

}  // namespace rtlforge
