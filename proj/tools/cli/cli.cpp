#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rtlforge/autodv.hpp"
#include "rtlforge/bench.hpp"
#include "rtlforge/error.hpp"
#include "rtlforge/interaction.hpp"

namespace fs = std::filesystem;

namespace rtlforge::cli {

namespace {

constexpr std::string_view kEnvPrefix = "RTLFORGE_";
constexpr std::string_view kDefaultConfigFile = "rtlforge.toml";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string profile = "icarus";
    std::string stub_tools_dir;
    std::string provider = "replay";
    std::string model = "replay";
    std::string endpoint;
    std::string replay_dir;
    double temperature = 0.2;
    std::string api_key_env = "RTLFORGE_API_KEY";
    int request_timeout = 60;
    int max_retries = 2;
    bool review_agent = false;
    std::string review_model;
    std::string review_replay_dir;
    int max_iterations = 5;
    int max_agent_calls = 16;
    int tool_timeout = 120;
    int dv_max_iterations = 5;
    int dv_max_agent_calls = 16;
    double coverage_threshold = 0.90;
    std::string workspace = "rtlforge_runs";
    int jobs = 1;
    int verbosity = 0;
    bool interactive = false;
};

struct PromptOptions {
    std::string prompt;
    std::string prompt_file;
    std::string task_id;
};

struct VerifyOptions {
    std::string input;
    std::string prompt;
    std::string task_id;
    bool keep_testbench = false;
};

struct BenchOptions {
    std::string dataset;
    std::string mode = "autoreview";
    std::string out;
    int n = 1;
    int k = 1;
};

struct RecordOptions {
    std::string record_dir;
    bool force = false;
    std::string rtl;
    bool keep_testbench = false;
    PromptOptions prompt;
};

struct ImportOptions {
    std::string source_dir;
    std::string dataset;
};

std::string env_name(std::string_view flag) {
    std::string name(kEnvPrefix);
    for (char c : flag) {
        name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
}

// Settings set in the environment outrank the config file, so file entries
// for them are dropped before CLI11 applies the file.
class EnvFirstConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        std::erase_if(items, [](const CLI::ConfigItem& item) {
            return item.parents.empty() && std::getenv(env_name(item.name).c_str()) != nullptr;
        });
        return items;
    }
};

template <typename T>
CLI::Option* add_setting(CLI::App& app, const std::string& flag, T& value,
                         const std::string& description) {
    return app.add_option("--" + flag, value, description)
        ->envname(env_name(flag))
        ->capture_default_str();
}

CLI::Option* add_switch(CLI::App& app, const std::string& flag, bool& value,
                        const std::string& description) {
    return app.add_flag("--" + flag, value, description)->envname(env_name(flag));
}

const CLI::Validator kUnitInterval(
    [](std::string& text) -> std::string {
        try {
            std::size_t used = 0;
            const double value = std::stod(text, &used);
            if (used == text.size() && value > 0.0 && value <= 1.0) return {};
        } catch (const std::exception&) {
        }
        return fmt::format("value {} is not in (0, 1]", text);
    },
    "(0,1]", "UNIT_INTERVAL");

// Installed binaries find the stub tools next to themselves.
fs::path stub_tools_dir(const Options& o) {
    if (!o.stub_tools_dir.empty()) return o.stub_tools_dir;
    std::error_code ec;
    const fs::path exe = fs::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        const fs::path installed = exe.parent_path().parent_path() / "share" / "rtlforge" / "stub";
        if (fs::exists(installed / "fake_iverilog.py", ec)) return installed;
    }
    return default_stub_tools_dir();
}

AgentConfig code_agent_config(const Options& o) {
    AgentConfig config = default_agent_config(AgentRole::Code);
    config.provider = enum_from_string<ProviderKind>(o.provider);
    config.model_id = o.model;
    config.temperature = o.temperature;
    config.endpoint = o.endpoint;
    config.replay_dir = o.replay_dir;
    config.request_timeout_seconds = o.request_timeout;
    config.max_retries = o.max_retries;
    config.api_key_env = o.api_key_env;
    return config;
}

std::optional<AgentConfig> review_agent_config(const Options& o) {
    if (!o.review_agent && o.review_model.empty() && o.review_replay_dir.empty()) {
        return std::nullopt;
    }
    AgentConfig config = code_agent_config(o);
    config.temperature = default_agent_config(AgentRole::Review).temperature;
    if (!o.review_model.empty()) config.model_id = o.review_model;
    config.replay_dir = o.review_replay_dir;
    return config;
}

AutoDVConfig run_config(const Options& o) {
    try {
        AutoDVConfig dv;
        AutoReviewConfig& rc = dv.review_config;
        rc.budget = Budget{o.max_iterations, o.max_agent_calls, o.tool_timeout};
        rc.code_agent = code_agent_config(o);
        rc.review_agent = review_agent_config(o);
        rc.tool_profile = resolve_profile(o.profile, stub_tools_dir(o));
        rc.interactive = o.interactive;
        dv.coverage_threshold = o.coverage_threshold;
        dv.dv_budget = Budget{o.dv_max_iterations, o.dv_max_agent_calls, o.tool_timeout};
        validate(dv);
        validate(rc.code_agent);
        if (rc.review_agent) validate(*rc.review_agent);
        return dv;
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

struct Session {
    Options options;
    AutoDVConfig config;
    std::shared_ptr<ChatAgent> code;
    std::shared_ptr<ChatAgent> review;
    std::shared_ptr<RecordingAgent> code_recorder;
    std::shared_ptr<RecordingAgent> review_recorder;

    std::size_t recorded() const {
        return (code_recorder ? code_recorder->recorded() : 0) +
               (review_recorder ? review_recorder->recorded() : 0);
    }
};

Session open_session(const Options& o, const std::optional<fs::path>& record_dir,
                     std::ostream& err) {
    Session s;
    s.options = o;
    s.config = run_config(o);
    const AutoReviewConfig& rc = s.config.review_config;
    try {
        s.code = make_agent(rc.code_agent);
        if (rc.review_agent) s.review = make_agent(*rc.review_agent);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    if (record_dir) {
        s.code_recorder = std::make_shared<RecordingAgent>(s.code, *record_dir);
        s.code = s.code_recorder;
        if (s.review) {
            s.review_recorder = std::make_shared<RecordingAgent>(s.review, *record_dir / "review");
            s.review = s.review_recorder;
        }
    }
    if (o.verbosity > 0) {
        err << fmt::format("profile: {}; code agent: {} {}; review agent: {}\n",
                           rc.tool_profile.tool_id, to_string(rc.code_agent.provider),
                           rc.code_agent.model_id,
                           rc.review_agent ? rc.review_agent->model_id : "none");
    }
    return s;
}

std::string read_prompt(const PromptOptions& p) {
    const bool inline_prompt = !p.prompt.empty();
    const bool file_prompt = !p.prompt_file.empty();
    if (inline_prompt == file_prompt) {
        throw UsageError("give the prompt with exactly one of --prompt or --prompt-file");
    }
    if (inline_prompt) return p.prompt;
    try {
        return read_text_file(p.prompt_file);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::string checked_task_id(const std::string& id) {
    if (!is_filesystem_safe(id)) {
        throw UsageError(fmt::format("task id '{}' may only use letters, digits, '_', '-' and '.'", id));
    }
    return id;
}

std::string final_error_count(const LoopOutcome& outcome) {
    for (auto it = outcome.trace.rbegin(); it != outcome.trace.rend(); ++it) {
        if (it->compile) return std::to_string(it->compile->error_count());
    }
    return "n/a";
}

int run_generate(Session& s, const std::string& prompt, const std::string& task_id,
                 std::istream& in, std::ostream& out, std::ostream& err) {
    const DesignTask task = make_design_task(checked_task_id(task_id), prompt);
    const Workspace ws = make_workspace(task.task_id, s.options.workspace);
    if (s.options.verbosity > 0) {
        err << fmt::format("prompt classified as {}\n", to_string(task.prompt_case));
    }
    StreamChannel channel(in, err);
    AutoReviewEngine engine(s.config.review_config, s.code, s.review,
                            s.options.interactive ? &channel : nullptr);
    const LoopOutcome outcome = engine.run(task, ws);
    out << fmt::format("workspace: {}\n", ws.root.string());
    out << fmt::format("status: {}\n", to_string(outcome.status));
    out << fmt::format("iterations: {}, errors: {}\n", outcome.iterations_used,
                       final_error_count(outcome));
    if (!outcome.detail.empty()) err << outcome.detail << "\n";
    return exit_code_for(outcome.status);
}

std::string join_sources(const std::string& design, const std::string& testbench) {
    return testbench.empty() ? design : design + "\n\n" + testbench;
}

// A file, or a workspace holding outcome.json or design.v / testbench.v.
std::string load_rtl(const fs::path& input) {
    try {
        std::error_code ec;
        if (!fs::is_directory(input, ec)) return read_text_file(input);
        if (fs::exists(input / "outcome.json", ec)) {
            const auto outcome = from_json_text<LoopOutcome>(read_text_file(input / "outcome.json"));
            if (outcome.final_bundle) {
                return join_sources(outcome.final_bundle->design_source,
                                    outcome.final_bundle->testbench_source);
            }
        }
        const fs::path design = input / kDesignFileName;
        const fs::path testbench = input / kTestbenchFileName;
        if (!fs::exists(design, ec)) {
            throw UsageError(fmt::format("{} holds neither a final bundle in outcome.json nor {}",
                                         input.string(), kDesignFileName));
        }
        return join_sources(read_text_file(design),
                            fs::exists(testbench, ec) ? read_text_file(testbench) : "");
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

int run_verify(Session& s, const VerifyOptions& v, std::istream& in, std::ostream& out,
               std::ostream& err) {
    const fs::path input = v.input;
    const std::string rtl = load_rtl(input);
    std::string task_id = v.task_id;
    if (task_id.empty()) {
        const std::string stem = fs::is_directory(input) ? "verify" : input.stem().string();
        task_id = is_filesystem_safe(stem) ? stem : "verify";
    }
    const std::string prompt = v.prompt.empty()
                                   ? fmt::format("Verify the design in {}.", input.filename().string())
                                   : v.prompt;
    const DesignTask task = make_design_task(checked_task_id(task_id), prompt, rtl);
    AutoDVConfig config = s.config;
    config.regenerate_testbench = !v.keep_testbench;
    const Workspace ws = make_workspace(task.task_id, s.options.workspace);
    StreamChannel channel(in, err);
    AutoDVEngine engine(config, s.code, s.review, s.options.interactive ? &channel : nullptr);
    const LoopOutcome outcome = engine.run(task, ws);
    out << fmt::format("workspace: {}\n", ws.root.string());
    out << verification_summary(task, outcome, config.coverage_threshold);
    if (outcome.status == LoopStatus::Success) return kExitSuccess;
    try {
        const auto verdict = verification_verdict(outcome, config.coverage_threshold);
        if (verdict.functional_pass && !verdict.met_coverage) return kExitNoCoverage;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::MissingReports) throw;
    }
    return exit_code_for(outcome.status);
}

int run_bench(const Options& o, const BenchOptions& b, std::ostream& out, std::ostream& err) {
    if (b.k > b.n) throw UsageError(fmt::format("--k ({}) must not exceed --n ({})", b.k, b.n));
    const BenchMode mode = enum_from_string<BenchMode>(b.mode);
    std::vector<BenchmarkTask> dataset;
    try {
        dataset = load_dataset(b.dataset);
    } catch (const Error& e) {
        err << fmt::format("error: {}: {}\n", b.dataset, e.what());
        return kExitDataset;
    }
    if (dataset.empty()) {
        err << fmt::format("error: {} holds no tasks\n", b.dataset);
        return kExitDataset;
    }
    BenchConfig config;
    config.dv = run_config(o);
    config.work_dir = fs::path(o.workspace) / "bench";
    const fs::path out_dir =
        b.out.empty() ? fs::path(o.workspace) / "reports" / std::string(to_string(mode)) : fs::path(b.out);
    if (o.verbosity > 0) {
        err << fmt::format("running {} task(s) x {} sample(s) in {} mode on {} worker(s)\n",
                           dataset.size(), b.n, to_string(mode), o.jobs);
    }
    const SuiteReport report = run_suite(dataset, mode, b.n, b.k, o.jobs, config);
    const fs::path json = emit_report(report, ReportFormat::Json, out_dir);
    const fs::path markdown = emit_report(report, ReportFormat::MarkdownTable, out_dir);
    out << render_markdown(std::span<const SuiteReport>(&report, 1));
    err << fmt::format("reports: {} {}\n", json.string(), markdown.string());
    return kExitSuccess;
}

bool is_recording_file(const fs::path& path) {
    const std::string stem = path.stem().string();
    return path.extension() == ".txt" && !stem.empty() &&
           std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); });
}

void clear_recordings(const fs::path& dir) {
    std::error_code ec;
    for (const fs::path& d : {dir, dir / "review"}) {
        if (!fs::is_directory(d, ec)) continue;
        for (const auto& entry : fs::directory_iterator(d)) {
            if (entry.is_regular_file() && is_recording_file(entry.path())) fs::remove(entry.path());
        }
    }
    if (fs::is_directory(dir / "review", ec) && fs::is_empty(dir / "review", ec)) {
        fs::remove(dir / "review", ec);
    }
}

int run_record(const Options& o, const RecordOptions& r, std::istream& in, std::ostream& out,
               std::ostream& err) {
    const bool has_prompt = !r.prompt.prompt.empty() || !r.prompt.prompt_file.empty();
    if (has_prompt == !r.rtl.empty()) {
        throw UsageError("record needs a prompt (--prompt/--prompt-file) or --rtl, not both");
    }
    const fs::path dir = r.record_dir;
    std::error_code ec;
    if (fs::exists(dir, ec) && !(fs::is_directory(dir, ec) && fs::is_empty(dir, ec))) {
        if (!r.force) {
            throw UsageError(fmt::format("{} is not empty; pass --force to overwrite", dir.string()));
        }
        if (!fs::is_directory(dir, ec)) {
            throw UsageError(fmt::format("{} is not a directory", dir.string()));
        }
        clear_recordings(dir);
    }
    fs::create_directories(dir, ec);
    if (ec) throw UsageError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    Session s = open_session(o, dir, err);
    int code = 0;
    if (has_prompt) {
        code = run_generate(s, read_prompt(r.prompt),
                            r.prompt.task_id.empty() ? "design" : r.prompt.task_id, in, out, err);
    } else {
        VerifyOptions v;
        v.input = r.rtl;
        v.task_id = r.prompt.task_id;
        v.keep_testbench = r.keep_testbench;
        code = run_verify(s, v, in, out, err);
    }
    out << fmt::format("recorded: {} response(s) in {}\n", s.recorded(), dir.string());
    return code;
}

int run_import(const ImportOptions& i, std::ostream& out, std::ostream& err) {
    try {
        const std::size_t count = import_verilogeval(i.source_dir, i.dataset);
        out << fmt::format("imported {} task(s) into {}\n", count, i.dataset);
        return kExitSuccess;
    } catch (const Error& e) {
        err << fmt::format("error: {}\n", e.what());
        return kExitDataset;
    }
}

void add_prompt_options(CLI::App& cmd, PromptOptions& p) {
    auto* inline_prompt = cmd.add_option("--prompt", p.prompt, "Design request text");
    auto* file_prompt = cmd.add_option("--prompt-file", p.prompt_file, "Read the design request from a file")
                            ->check(CLI::ExistingFile);
    inline_prompt->excludes(file_prompt);
    cmd.add_option("--task-id", p.task_id, "Name of the task and its workspace directory");
}

}  // namespace

int exit_code_for(LoopStatus status) {
    switch (status) {
        case LoopStatus::Success: return kExitSuccess;
        case LoopStatus::BudgetExhausted: return kExitBudget;
        case LoopStatus::ToolFailure:
        case LoopStatus::AgentFailure: return kExitFailure;
    }
    return kExitFailure;
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
    Options o;
    PromptOptions generate_opts;
    VerifyOptions verify_opts;
    BenchOptions bench_opts;
    RecordOptions record_opts;
    ImportOptions import_opts;

    CLI::App app{"Generate, repair and verify RTL with LLM agents in the loop with EDA tools.",
                 "rtlforge"};
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.config_formatter(std::make_shared<EnvFirstConfig>());
    app.set_config("--config", std::string(kDefaultConfigFile), "Read settings from a TOML file")
        ->envname(env_name("config"));

    add_setting(app, "profile", o.profile, "Tool profile: icarus, stub, or a profile JSON file");
    add_setting(app, "stub-tools-dir", o.stub_tools_dir, "Directory of the stub tools");
    add_setting(app, "provider", o.provider, "Code agent backend")
        ->check(CLI::IsMember({"replay", "http"}));
    add_setting(app, "model", o.model, "Model id sent to the chat endpoint");
    add_setting(app, "endpoint", o.endpoint, "Chat-completions URL (http provider)");
    add_setting(app, "replay-dir", o.replay_dir, "Recorded code agent replies (replay provider)");
    add_setting(app, "temperature", o.temperature, "Code agent sampling temperature")
        ->check(CLI::Range(0.0, 2.0));
    add_setting(app, "api-key-env", o.api_key_env,
                "Name of the environment variable holding the API key");
    add_setting(app, "request-timeout", o.request_timeout, "Seconds per agent request")
        ->check(CLI::PositiveNumber);
    add_setting(app, "max-retries", o.max_retries, "Retries of a failed agent request")
        ->check(CLI::NonNegativeNumber);
    add_switch(app, "review-agent", o.review_agent, "Use a review agent to analyse tool logs");
    add_setting(app, "review-model", o.review_model, "Review agent model id (enables the review agent)");
    add_setting(app, "review-replay-dir", o.review_replay_dir,
                "Recorded review agent replies (enables the review agent)");
    add_setting(app, "max-iterations", o.max_iterations, "Review loop iteration budget")
        ->check(CLI::PositiveNumber);
    add_setting(app, "max-agent-calls", o.max_agent_calls, "Review loop agent call budget")
        ->check(CLI::PositiveNumber);
    add_setting(app, "tool-timeout", o.tool_timeout, "Seconds allowed per tool stage")
        ->check(CLI::PositiveNumber);
    add_setting(app, "dv-max-iterations", o.dv_max_iterations, "Verification loop iteration budget")
        ->check(CLI::PositiveNumber);
    add_setting(app, "dv-max-agent-calls", o.dv_max_agent_calls, "Verification loop agent call budget")
        ->check(CLI::PositiveNumber);
    add_setting(app, "coverage-threshold", o.coverage_threshold,
                "Aggregate coverage a verification run must reach")
        ->check(kUnitInterval);
    add_setting(app, "workspace", o.workspace, "Base directory for run workspaces");
    add_setting(app, "jobs", o.jobs, "Worker threads for bench")->check(CLI::PositiveNumber);
    add_switch(app, "interactive", o.interactive, "Ask clarifying questions on the terminal");
    app.add_flag("-v,--verbose", o.verbosity, "Print progress to standard error");

    auto* generate = app.add_subcommand("generate", "Generate RTL from a prompt and repair it until it compiles");
    add_prompt_options(*generate, generate_opts);

    auto* verify = app.add_subcommand("verify", "Simulate and cover existing RTL, revising it until it passes");
    verify->add_option("input", verify_opts.input, "RTL file or run workspace")->required();
    verify->add_option("--prompt", verify_opts.prompt, "What the design is meant to do");
    verify->add_option("--task-id", verify_opts.task_id, "Name of the task and its workspace directory");
    verify->add_flag("--keep-testbench", verify_opts.keep_testbench,
                     "Revise only the design when the simulation fails");

    auto* bench = app.add_subcommand("bench", "Score a dataset of tasks and write pass@k reports");
    bench->add_option("dataset", bench_opts.dataset, "Dataset file, one JSON task per line")->required();
    bench->add_option("--mode", bench_opts.mode, "Which loop to run")
        ->check(CLI::IsMember({"baseline", "autoreview", "autodv"}))
        ->capture_default_str();
    bench->add_option("--n", bench_opts.n, "Samples per task")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--k", bench_opts.k, "k of pass@k")->check(CLI::PositiveNumber)->capture_default_str();
    bench->add_option("--out", bench_opts.out, "Report directory (default <workspace>/reports/<mode>)");

    auto* record = app.add_subcommand("record", "Run generate or verify and save every agent reply for replay");
    record->add_option("--record-dir", record_opts.record_dir, "Directory receiving NNN.txt replies")->required();
    record->add_flag("--force", record_opts.force, "Overwrite recordings in a non-empty directory");
    record->add_option("--rtl", record_opts.rtl, "Verify this RTL file instead of generating");
    record->add_flag("--keep-testbench", record_opts.keep_testbench,
                     "Revise only the design when the simulation fails");
    add_prompt_options(*record, record_opts.prompt);

    auto* import = app.add_subcommand("import-verilogeval",
                                      "Convert VerilogEval problem files into a dataset file");
    import->add_option("source", import_opts.source_dir, "Directory of <id>_prompt.txt and <id>_test.sv files")
        ->required()
        ->check(CLI::ExistingDirectory);
    import->add_option("dataset", import_opts.dataset, "Dataset file to write")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitSuccess : kExitUsage;
    }

    try {
        if (app.got_subcommand(generate)) {
            const std::string prompt = read_prompt(generate_opts);
            Session s = open_session(o, std::nullopt, err);
            return run_generate(s, prompt,
                                generate_opts.task_id.empty() ? "design" : generate_opts.task_id, in,
                                out, err);
        }
        if (app.got_subcommand(verify)) {
            Session s = open_session(o, std::nullopt, err);
            return run_verify(s, verify_opts, in, out, err);
        }
        if (app.got_subcommand(bench)) return run_bench(o, bench_opts, out, err);
        if (app.got_subcommand(record)) return run_record(o, record_opts, in, out, err);
        if (app.got_subcommand(import)) return run_import(import_opts, out, err);
    } catch (const UsageError& e) {
        err << fmt::format("error: {}\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        err << fmt::format("error: {}\n", e.what());
        switch (e.kind()) {
            case ErrorKind::ConfigError:
            case ErrorKind::PreconditionViolation:
            case ErrorKind::DomainError:
            case ErrorKind::InvariantViolation:
                return kExitUsage;
            default:
                return kExitFailure;
        }
    } catch (const std::exception& e) {
        err << fmt::format("error: {}\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace rtlforge::cli
