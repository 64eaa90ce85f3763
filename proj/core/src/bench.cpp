#include "rtlforge/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "rtlforge/error.hpp"

namespace fs = std::filesystem;

namespace rtlforge {

double pass_at_k(long n, long c, long k) {
    if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
        fail(ErrorKind::DomainError, fmt::format("pass@k needs 0 <= c <= n and 1 <= k <= n "
                                                 "(n={}, c={}, k={})",
                                                 n, c, k));
    }
    if (k == 1) return static_cast<double>(c) / static_cast<double>(n);
    if (n - c < k) return 1.0;
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)
    double fail_all = 1.0;
    for (long i = n - c + 1; i <= n; ++i) {
        fail_all *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    }
    return std::clamp(1.0 - fail_all, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Dataset

void to_json(Json& j, const BenchmarkTask& v) {
    j = Json::object();
    j["task_id"] = v.task_id;
    j["prompt"] = v.prompt;
    j["golden_testbench"] = v.golden_testbench;
    if (v.reference_design) j["reference_design"] = *v.reference_design;
}

namespace {

std::string required_text(const Json& j, const char* key, std::size_t line_no) {
    if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
        fail(ErrorKind::FormatError,
             fmt::format("line {}: missing or empty string field '{}'", line_no, key));
    }
    return j.at(key).get<std::string>();
}

}  // namespace

std::vector<BenchmarkTask> load_dataset(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, fmt::format("cannot read dataset {}", path.string()));
    std::vector<BenchmarkTask> tasks;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            fail(ErrorKind::FormatError, fmt::format("line {}: {}", line_no, e.what()));
        }
        if (!j.is_object()) {
            fail(ErrorKind::FormatError, fmt::format("line {}: expected a JSON object", line_no));
        }
        BenchmarkTask task;
        task.task_id = required_text(j, "task_id", line_no);
        task.prompt = required_text(j, "prompt", line_no);
        task.golden_testbench = required_text(j, "golden_testbench", line_no);
        for (const char* key : {"reference_design", "reference"}) {
            if (j.contains(key) && j.at(key).is_string()) {
                task.reference_design = j.at(key).get<std::string>();
                break;
            }
        }
        if (!is_filesystem_safe(task.task_id)) {
            fail(ErrorKind::FormatError,
                 fmt::format("line {}: task id '{}' is not a safe name", line_no, task.task_id));
        }
        if (!seen.insert(task.task_id).second) {
            fail(ErrorKind::DuplicateTaskId,
                 fmt::format("line {}: duplicate task id '{}'", line_no, task.task_id));
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::size_t import_verilogeval(const fs::path& source_dir, const fs::path& dataset_file) {
    if (!fs::is_directory(source_dir)) {
        fail(ErrorKind::IoError, fmt::format("{} is not a directory", source_dir.string()));
    }
    constexpr std::string_view kSuffix = "_prompt.txt";
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(source_dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
            ids.push_back(name.substr(0, name.size() - kSuffix.size()));
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) {
        fail(ErrorKind::FormatError,
             fmt::format("no *_prompt.txt files in {}", source_dir.string()));
    }
    std::string out;
    for (const auto& id : ids) {
        const fs::path test = source_dir / (id + "_test.sv");
        if (!fs::exists(test)) {
            fail(ErrorKind::FormatError, fmt::format("task {} has no {}", id, test.filename().string()));
        }
        BenchmarkTask task;
        task.task_id = id;
        task.prompt = read_text_file(source_dir / (id + "_prompt.txt"));
        task.golden_testbench = read_text_file(test);
        if (const fs::path ref = source_dir / (id + "_ref.sv"); fs::exists(ref)) {
            task.reference_design = read_text_file(ref);
        }
        Json j = task;
        out += j.dump() + "\n";
    }
    write_text_file(dataset_file, out);
    return ids.size();
}

// ---------------------------------------------------------------------------
// Reports

std::string_view to_string(BenchMode value) {
    switch (value) {
        case BenchMode::Baseline: return "baseline";
        case BenchMode::AutoReview: return "autoreview";
        case BenchMode::AutoDV: return "autodv";
    }
    return "?";
}

template <>
BenchMode enum_from_string<BenchMode>(std::string_view name) {
    for (auto mode : {BenchMode::Baseline, BenchMode::AutoReview, BenchMode::AutoDV}) {
        if (to_string(mode) == name) return mode;
    }
    fail(ErrorKind::FormatError, fmt::format("unknown bench mode '{}'", name));
}

void to_json(Json& j, const SampleResult& v) {
    j = Json::object();
    j["task_id"] = v.task_id;
    j["sample_index"] = v.sample_index;
    j["syntax_ok"] = v.syntax_ok;
    j["functional_ok"] = v.functional_ok;
    j["coverage_met"] = v.coverage_met;
    j["syntax_error_count"] = v.syntax_error_count;
    j["iterations_used"] = v.iterations_used;
    j["status"] = v.status;
    j["detail"] = v.detail;
}

void from_json(const Json& j, SampleResult& v) {
    v.task_id = j.at("task_id").get<std::string>();
    v.sample_index = j.at("sample_index").get<int>();
    v.syntax_ok = j.at("syntax_ok").get<bool>();
    v.functional_ok = j.at("functional_ok").get<bool>();
    v.coverage_met = j.at("coverage_met").get<bool>();
    v.syntax_error_count = j.at("syntax_error_count").get<int>();
    v.iterations_used = j.at("iterations_used").get<int>();
    v.status = j.value("status", std::string{});
    v.detail = j.value("detail", std::string{});
}

void to_json(Json& j, const TaskSummary& v) {
    j = Json::object();
    j["n"] = v.n;
    j["c_syntax"] = v.c_syntax;
    j["c_functional"] = v.c_functional;
    j["coverage_met_any"] = v.coverage_met_any;
}

void from_json(const Json& j, TaskSummary& v) {
    v.n = j.at("n").get<int>();
    v.c_syntax = j.at("c_syntax").get<int>();
    v.c_functional = j.at("c_functional").get<int>();
    v.coverage_met_any = j.at("coverage_met_any").get<bool>();
}

void to_json(Json& j, const SuiteReport& v) {
    j = Json::object();
    j["mode"] = std::string(to_string(v.mode));
    j["model_id"] = v.model_id;
    j["n_samples"] = v.n_samples;
    j["k"] = v.k;
    j["pass_at_k_syntax"] = v.pass_at_k_syntax;
    j["pass_at_k_functional"] = v.pass_at_k_functional;
    j["total_syntax_errors"] = v.total_syntax_errors;
    j["verification_success_rate"] =
        v.verification_success_rate ? Json(*v.verification_success_rate) : Json(nullptr);
    j["config_fingerprint"] = v.config_fingerprint;
    Json tasks = Json::object();
    for (const auto& [id, summary] : v.per_task) tasks[id] = summary;
    j["per_task"] = tasks;
    j["samples"] = v.samples;
}

void from_json(const Json& j, SuiteReport& v) {
    v.mode = enum_from_string<BenchMode>(j.at("mode").get<std::string>());
    v.model_id = j.at("model_id").get<std::string>();
    v.n_samples = j.at("n_samples").get<int>();
    v.k = j.at("k").get<int>();
    v.pass_at_k_syntax = j.at("pass_at_k_syntax").get<double>();
    v.pass_at_k_functional = j.at("pass_at_k_functional").get<double>();
    v.total_syntax_errors = j.at("total_syntax_errors").get<long>();
    v.verification_success_rate.reset();
    if (j.contains("verification_success_rate") && !j.at("verification_success_rate").is_null()) {
        v.verification_success_rate = j.at("verification_success_rate").get<double>();
    }
    v.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    v.per_task.clear();
    for (const auto& [id, summary] : j.at("per_task").items()) {
        v.per_task[id] = summary.get<TaskSummary>();
    }
    v.samples = j.value("samples", std::vector<SampleResult>{});
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

const IterationRecord* first_compile(const LoopOutcome& outcome) {
    for (const auto& r : outcome.trace) {
        if (r.compile) return &r;
    }
    return nullptr;
}

const IterationRecord* last_compile(const LoopOutcome& outcome) {
    for (auto it = outcome.trace.rbegin(); it != outcome.trace.rend(); ++it) {
        if (it->compile) return &*it;
    }
    return nullptr;
}

}  // namespace

SampleResult score_sample(const LoopOutcome& outcome, const BenchmarkTask& task,
                          const ToolProfile& profile, const Workspace& ws,
                          double coverage_threshold) {
    if (task.golden_testbench.empty()) {
        fail(ErrorKind::PreconditionViolation,
             fmt::format("task {} has no golden testbench", task.task_id));
    }
    SampleResult result;
    result.task_id = task.task_id;
    result.iterations_used = outcome.iterations_used;
    result.status = std::string(to_string(outcome.status));
    result.detail = outcome.detail;
    if (const auto* first = first_compile(outcome)) {
        result.syntax_error_count = static_cast<int>(first->compile->error_count());
    }
    const auto* last = last_compile(outcome);
    result.syntax_ok = outcome.final_bundle && last && last->compile->error_count() == 0;
    try {
        const auto verdict = verification_verdict(outcome, coverage_threshold);
        result.coverage_met = verdict.met_coverage;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::MissingReports) throw;
    }
    if (!result.syntax_ok) return result;

    RtlBundle golden;
    golden.design_source = outcome.final_bundle->design_source;
    if (task.reference_design) golden.design_source += "\n\n" + *task.reference_design;
    golden.testbench_source = task.golden_testbench;
    golden.top_module = outcome.final_bundle->top_module;
    Workspace sandbox{ws.subdir("golden"), ws.task_id};
    try {
        const CompileReport compiled = compile(profile, golden, sandbox);
        if (compiled.error_count() > 0) return result;
        result.functional_ok = simulate(profile, golden, sandbox).passed;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ToolNotFound || e.kind() == ErrorKind::MissingArtifact ||
            e.kind() == ErrorKind::IoError) {
            fail(ErrorKind::ToolFailure, fmt::format("golden scoring of {} failed: {}",
                                                     task.task_id, e.what()));
        }
        throw;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Suite

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

AutoReviewConfig review_config_for(BenchMode mode, const AutoDVConfig& dv) {
    AutoReviewConfig rc = dv.review_config;
    rc.interactive = false;
    if (mode != BenchMode::AutoDV) {
        // golden testbenches do the checking; no self-test is needed
        rc.request_testbench = false;
    }
    if (mode == BenchMode::Baseline) {
        rc.budget.max_iterations = 1;
        rc.budget.max_agent_calls = 1;
        rc.review_agent.reset();
    }
    return rc;
}

}  // namespace

std::string config_fingerprint(BenchMode mode, int n_samples, int k, const BenchConfig& config) {
    const AutoReviewConfig rc = review_config_for(mode, config.dv);
    Json j = Json::object();
    j["mode"] = std::string(to_string(mode));
    j["n_samples"] = n_samples;
    j["k"] = k;
    j["budget"] = rc.budget;
    j["code_agent"] = rc.code_agent;
    j["review_agent"] = rc.review_agent ? Json(*rc.review_agent) : Json(nullptr);
    j["tool_profile"] = rc.tool_profile;
    j["request_testbench"] = rc.request_testbench;
    j["issue_cap"] = rc.issue_cap;
    if (mode == BenchMode::AutoDV) {
        j["dv_budget"] = config.dv.dv_budget;
        j["coverage_threshold"] = config.dv.coverage_threshold;
        j["regenerate_testbench"] = config.dv.regenerate_testbench;
    }
    return fmt::format("{:016x}", fnv1a(j.dump()));
}

AgentConfig sample_agent_config(const AgentConfig& base, const std::string& task_id,
                                int sample_index, const std::string& fingerprint) {
    AgentConfig config = base;
    if (config.provider == ProviderKind::Replay) {
        const fs::path per_sample =
            base.replay_dir / task_id / fmt::format("sample_{:03d}", sample_index);
        const fs::path per_task = base.replay_dir / task_id;
        if (fs::is_directory(per_sample)) {
            config.replay_dir = per_sample;
        } else if (fs::is_directory(per_task)) {
            config.replay_dir = per_task;
        }
    } else {
        config.seed = fnv1a(fmt::format("{}:{}:{}", task_id, sample_index, fingerprint));
    }
    return config;
}

SuiteReport run_suite(const std::vector<BenchmarkTask>& dataset, BenchMode mode, int n_samples,
                      int k, int jobs, const BenchConfig& config) {
    if (dataset.empty()) fail(ErrorKind::PreconditionViolation, "dataset is empty");
    if (!(k >= 1 && n_samples >= k)) {
        fail(ErrorKind::DomainError,
             fmt::format("need n_samples >= k >= 1 (n_samples={}, k={})", n_samples, k));
    }
    if (config.work_dir.empty()) fail(ErrorKind::PreconditionViolation, "no work directory");

    const AutoReviewConfig rc = review_config_for(mode, config.dv);
    AutoDVConfig dv = config.dv;
    dv.review_config = rc;
    const std::string fingerprint = config_fingerprint(mode, n_samples, k, config);
    const AgentFactory factory =
        config.agent_factory
            ? config.agent_factory
            : AgentFactory([](const AgentConfig& c, const std::string&, int) { return make_agent(c); });

    struct Unit {
        const BenchmarkTask* task;
        int sample;
    };
    std::vector<Unit> units;
    for (const auto& task : dataset) {
        for (int s = 1; s <= n_samples; ++s) units.push_back({&task, s});
    }
    std::vector<SampleResult> results(units.size());

    auto run_unit = [&](const Unit& unit) {
        const BenchmarkTask& task = *unit.task;
        SampleResult result;
        result.task_id = task.task_id;
        try {
            const DesignTask design_task = make_design_task(task.task_id, task.prompt);
            const Workspace ws = make_workspace(
                task.task_id, config.work_dir / std::string(to_string(mode)) /
                                  fmt::format("sample_{:03d}", unit.sample));
            auto code = factory(sample_agent_config(rc.code_agent, task.task_id, unit.sample,
                                                    fingerprint),
                                task.task_id, unit.sample);
            std::shared_ptr<ChatAgent> review;
            if (rc.review_agent) {
                review = factory(sample_agent_config(*rc.review_agent, task.task_id, unit.sample,
                                                     fingerprint),
                                 task.task_id, unit.sample);
            }
            const LoopOutcome outcome =
                mode == BenchMode::AutoDV
                    ? AutoDVEngine(dv, code, review).run(design_task, ws)
                    : AutoReviewEngine(rc, code, review).run(design_task, ws);
            result = score_sample(outcome, task, rc.tool_profile, ws, dv.coverage_threshold);
            if (mode != BenchMode::AutoDV) result.coverage_met = false;
        } catch (const std::exception& e) {
            // a failing sample scores as a failure, it is never resampled
            result = SampleResult{};
            result.task_id = task.task_id;
            result.status = "error";
            result.detail = e.what();
        }
        result.sample_index = unit.sample;
        return result;
    };

    const std::size_t workers =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, units.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < units.size(); i = next++) results[i] = run_unit(units[i]);
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::sort(results.begin(), results.end(), [](const SampleResult& a, const SampleResult& b) {
        return std::tie(a.task_id, a.sample_index) < std::tie(b.task_id, b.sample_index);
    });

    SuiteReport report;
    report.mode = mode;
    report.model_id = rc.code_agent.model_id;
    report.n_samples = n_samples;
    report.k = k;
    report.config_fingerprint = fingerprint;
    for (const auto& r : results) {
        TaskSummary& summary = report.per_task[r.task_id];
        ++summary.n;
        summary.c_syntax += r.syntax_ok ? 1 : 0;
        summary.c_functional += r.functional_ok ? 1 : 0;
        summary.coverage_met_any = summary.coverage_met_any || r.coverage_met;
        if (r.sample_index == 1) report.total_syntax_errors += r.syntax_error_count;
    }
    double syntax_sum = 0.0;
    double functional_sum = 0.0;
    long covered_tasks = 0;
    for (const auto& [id, summary] : report.per_task) {
        syntax_sum += pass_at_k(summary.n, summary.c_syntax, k);
        functional_sum += pass_at_k(summary.n, summary.c_functional, k);
        covered_tasks += summary.coverage_met_any ? 1 : 0;
    }
    const auto tasks = static_cast<double>(report.per_task.size());
    report.pass_at_k_syntax = syntax_sum / tasks;
    report.pass_at_k_functional = functional_sum / tasks;
    if (mode == BenchMode::AutoDV) {
        report.verification_success_rate = static_cast<double>(covered_tasks) / tasks;
    }
    report.samples = std::move(results);
    return report;
}

namespace {

std::string percent(double ratio) { return fmt::format("{:.2f}%", ratio * 100.0); }

}  // namespace

std::string render_markdown(std::span<const SuiteReport> reports) {
    std::string text =
        "| Mode | Model | Tasks | n | k | pass@k syntax | pass@k functional | "
        "Total syntax errors | Success rate |\n"
        "|---|---|---:|---:|---:|---:|---:|---:|---:|\n";
    double rate_sum = 0.0;
    int rates = 0;
    for (const auto& r : reports) {
        if (r.per_task.empty()) fail(ErrorKind::FormatError, "report has no tasks");
        std::string rate = "n/a";
        if (r.verification_success_rate) {
            rate = percent(*r.verification_success_rate);
            rate_sum += *r.verification_success_rate;
            ++rates;
        }
        text += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", to_string(r.mode),
                            r.model_id, r.per_task.size(), r.n_samples, r.k,
                            percent(r.pass_at_k_syntax), percent(r.pass_at_k_functional),
                            r.total_syntax_errors, rate);
    }
    if (rates > 1) {
        text += fmt::format("| mean | | | | | | | | {} |\n", percent(rate_sum / rates));
    }
    return text;
}

fs::path emit_report(const SuiteReport& report, ReportFormat format, const fs::path& out_dir) {
    if (report.per_task.empty()) fail(ErrorKind::FormatError, "report has no tasks");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::IoError, fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
    if (format == ReportFormat::Json) {
        const fs::path path = out_dir / "report.json";
        write_text_file(path, to_canonical_json(report));
        return path;
    }
    const fs::path path = out_dir / "report.md";
    write_text_file(path, render_markdown(std::span<const SuiteReport>(&report, 1)));
    return path;
}

}  // namespace rtlforge
