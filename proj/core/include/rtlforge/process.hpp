#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rtlforge {

struct ProcessRequest {
    std::vector<std::string> argv;
    std::filesystem::path workdir;
    std::chrono::milliseconds timeout{60'000};
    // Names of variables copied from our environment besides PATH.
    std::vector<std::string> env_passthrough;
    std::map<std::string, std::string> extra_env;
};

struct ProcessResult {
    int exit_code = -1;  // -1 when killed or terminated by a signal
    bool timed_out = false;
    std::string output;  // stdout and stderr interleaved
    double wall_seconds = 0.0;

    bool ok() const { return !timed_out && exit_code == 0; }
};

/// Runs argv[0] (looked up on PATH) in its own process group with a
/// scrubbed environment, capturing combined output. At the deadline the
/// whole group is killed. Throws ToolNotFound when the program cannot be
/// located or executed.
ProcessResult run_process(const ProcessRequest& request);

std::optional<std::filesystem::path> find_executable(const std::string& name);

/// Caps how many external processes run at once across all threads.
/// Defaults to the number of logical CPUs.
void set_process_limit(std::size_t limit);
std::size_t process_limit();

}  // namespace rtlforge
