#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtlforge/autodv.hpp"

namespace rtlforge {

/// Unbiased pass@k estimator 1 - C(n-c, k) / C(n, k) in product form.
/// Throws DomainError unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(long n, long c, long k);

struct BenchmarkTask {
    std::string task_id;
    std::string prompt;
    std::string golden_testbench;
    std::optional<std::string> reference_design;

    friend bool operator==(const BenchmarkTask&, const BenchmarkTask&) = default;
};

void to_json(Json& j, const BenchmarkTask& v);

/// One JSON object per line: task_id, prompt, golden_testbench and an
/// optional reference_design. Blank lines are skipped.
std::vector<BenchmarkTask> load_dataset(const std::filesystem::path& path);

/// Converts a directory of <id>_prompt.txt / <id>_test.sv / <id>_ref.sv
/// files into the dataset format. Returns the number of tasks written.
std::size_t import_verilogeval(const std::filesystem::path& source_dir,
                               const std::filesystem::path& dataset_file);

enum class BenchMode { Baseline, AutoReview, AutoDV };
std::string_view to_string(BenchMode value);
template <> BenchMode enum_from_string<BenchMode>(std::string_view name);

struct SampleResult {
    std::string task_id;
    int sample_index = 0;
    bool syntax_ok = false;
    bool functional_ok = false;
    bool coverage_met = false;
    int syntax_error_count = 0;
    int iterations_used = 0;
    std::string status;  // loop status, or "error" when the sample threw
    std::string detail;

    friend bool operator==(const SampleResult&, const SampleResult&) = default;
};

struct TaskSummary {
    int n = 0;
    int c_syntax = 0;
    int c_functional = 0;
    bool coverage_met_any = false;

    friend bool operator==(const TaskSummary&, const TaskSummary&) = default;
};

struct SuiteReport {
    BenchMode mode = BenchMode::AutoReview;
    std::string model_id;
    int n_samples = 1;
    int k = 1;
    std::map<std::string, TaskSummary> per_task;
    double pass_at_k_syntax = 0.0;
    double pass_at_k_functional = 0.0;
    long total_syntax_errors = 0;
    std::optional<double> verification_success_rate;  // AutoDV mode only
    std::string config_fingerprint;
    std::vector<SampleResult> samples;  // ordered by (task_id, sample_index)

    friend bool operator==(const SuiteReport&, const SuiteReport&) = default;
};

void to_json(Json& j, const SampleResult& v);
void from_json(const Json& j, SampleResult& v);
void to_json(Json& j, const TaskSummary& v);
void from_json(const Json& j, TaskSummary& v);
void to_json(Json& j, const SuiteReport& v);
void from_json(const Json& j, SuiteReport& v);

/// Scores a finished loop. Functional correctness is judged by the golden
/// testbench in a fresh directory under ws, never by the loop's own one.
SampleResult score_sample(const LoopOutcome& outcome, const BenchmarkTask& task,
                          const ToolProfile& profile, const Workspace& ws,
                          double coverage_threshold = 0.90);

using AgentFactory = std::function<std::shared_ptr<ChatAgent>(
    const AgentConfig& config, const std::string& task_id, int sample_index)>;

struct BenchConfig {
    AutoDVConfig dv;  // agents, tool profile and budgets for every mode
    std::filesystem::path work_dir;
    // Defaults to make_agent on a per-sample copy of the config (see
    // sample_agent_config).
    AgentFactory agent_factory;
};

/// Per-sample agent settings: replay agents read <dir>/<task>/sample_NNN/
/// or <dir>/<task>/ when present; live agents get a seed derived from the
/// task, the sample and the fingerprint.
AgentConfig sample_agent_config(const AgentConfig& base, const std::string& task_id,
                                int sample_index, const std::string& fingerprint);

std::string config_fingerprint(BenchMode mode, int n_samples, int k, const BenchConfig& config);

/// Runs n_samples independent loops per task on `jobs` worker threads.
/// Sample failures are recorded, never propagated.
SuiteReport run_suite(const std::vector<BenchmarkTask>& dataset, BenchMode mode, int n_samples,
                      int k, int jobs, const BenchConfig& config);

enum class ReportFormat { Json, MarkdownTable };

/// Writes report.json or report.md into out_dir and returns its path.
std::filesystem::path emit_report(const SuiteReport& report, ReportFormat format,
                                  const std::filesystem::path& out_dir);

/// One table row per report; with several reports that carry a success
/// rate a closing row gives their mean.
std::string render_markdown(std::span<const SuiteReport> reports);

}  // namespace rtlforge
