#include "rtlforge/autodv.hpp"

#include <algorithm>
#include <iostream>

#include <fmt/format.h>

#include "loop_context.hpp"
#include "rtlforge/error.hpp"

namespace fs = std::filesystem;

namespace rtlforge {

namespace {

using detail::BudgetStop;
using detail::LoopContext;

std::string percent(double ratio) { return fmt::format("{:.2f}%", ratio * 100.0); }

bool has_testbench(const RtlBundle& bundle) {
    return !declared_modules(bundle.testbench_source).empty();
}

// Adds a testbench to a clean design that came without one.
LoopStatus generate_testbench(LoopContext& ctx) {
    while (!has_testbench(ctx.state->bundle)) {
        const BudgetLeft left = ctx.remaining(IterationKind::Review);
        if (left.iterations_left <= 0 || left.calls_left <= 0) return LoopStatus::BudgetExhausted;
        IterationRecord record;
        record.index = ctx.next_index();
        record.kind = IterationKind::Review;
        record.prompt_sent = testbench_request_prompt(ctx.task, ctx.state->bundle);
        try {
            record.agent_response = ctx.ask_code(record.prompt_sent, record);
        } catch (const BudgetStop&) {
            return LoopStatus::BudgetExhausted;
        }
        auto candidate = ctx.extract(record.agent_response, record, false);
        if (candidate && has_testbench(*candidate)) {
            ctx.compile_into(record, *candidate, ctx.iteration_dir(record.index));
        }
        ctx.push(std::move(record));
        const LoopStatus repaired = ctx.repair_until_clean();
        if (repaired != LoopStatus::Success) return repaired;
    }
    return LoopStatus::Success;
}

// Simulation reuses the object compiled for the current bundle.
void stage_compiled_bundle(const detail::GateState& state, const ToolProfile& profile,
                           const Workspace& dir) {
    for (const std::string& name :
         {std::string(kDesignFileName), std::string(kTestbenchFileName), profile.compiled_file}) {
        const fs::path from = state.dir.root / name;
        std::error_code ec;
        if (!fs::exists(from, ec)) continue;
        fs::copy_file(from, dir.root / name, fs::copy_options::overwrite_existing, ec);
        if (ec) {
            fail(ErrorKind::IoError, fmt::format("cannot stage {}: {}", name, ec.message()));
        }
    }
}

struct VerifyResult {
    LoopStatus status;
    std::string detail;
};

VerifyResult verify_phase(LoopContext& ctx, const AutoDVConfig& config) {
    bool coverage_available = !ctx.profile.coverage_cmd.empty();
    std::string coverage_problem =
        coverage_available ? "" : "tool profile has no coverage command";

    for (;;) {
        if (ctx.remaining(IterationKind::Verify).iterations_left <= 0) {
            return {LoopStatus::BudgetExhausted, "verification budget exhausted"};
        }
        IterationRecord record;
        record.index = ctx.next_index();
        record.kind = IterationKind::Verify;
        const Workspace dir = ctx.iteration_dir(record.index);
        const RtlBundle bundle = ctx.state->bundle;
        stage_compiled_bundle(*ctx.state, ctx.profile, dir);

        record.sim = simulate(ctx.profile, bundle, dir);
        if (coverage_available && !record.sim->timed_out) {
            try {
                record.coverage = measure_coverage(ctx.profile, bundle, dir);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::ParseFailure && e.kind() != ErrorKind::MissingArtifact) {
                    throw;
                }
                // continue on simulation results alone for the rest of the run
                coverage_available = false;
                coverage_problem = e.what();
            }
        }

        const bool met = record.coverage && coverage_available &&
                         record.coverage->aggregate >= config.coverage_threshold;
        if (record.sim->passed && met) {
            ctx.push(std::move(record));
            return {LoopStatus::Success, ""};
        }
        if (record.sim->passed && !coverage_available) {
            ctx.push(std::move(record));
            return {LoopStatus::ToolFailure,
                    fmt::format("simulation passed but coverage is unavailable: {}",
                                coverage_problem)};
        }

        const ReviewFeedback feedback =
            distill(std::nullopt, record.sim,
                    coverage_available ? record.coverage : std::optional<CoverageReport>{},
                    DistillOptions{ctx.config.issue_cap, config.coverage_threshold});
        record.feedback = feedback;

        // the last iteration only reports; a revision could not be checked
        if (ctx.remaining(IterationKind::Verify).iterations_left <= 1) {
            ctx.push(std::move(record));
            return {LoopStatus::BudgetExhausted, "verification budget exhausted"};
        }
        const std::string& raw_log = feedback.phase == RepairPhase::CoverageImprovement
                                         ? record.coverage->raw_log
                                         : record.sim->raw_log;
        try {
            const auto analysis = ctx.analyse(feedback, raw_log, record);
            record.prompt_sent = render_review_prompt(feedback, bundle, analysis);
            record.agent_response = ctx.ask_code(record.prompt_sent, record);
        } catch (const BudgetStop&) {
            ctx.push(std::move(record));
            return {LoopStatus::BudgetExhausted, "verification agent calls exhausted"};
        }
        const bool keep_testbench =
            !config.regenerate_testbench && feedback.phase == RepairPhase::FunctionalRepair;
        if (auto candidate = ctx.extract(record.agent_response, record, keep_testbench)) {
            ctx.compile_into(record, *candidate, ctx.iteration_dir(record.index, "revision"));
        }
        ctx.push(std::move(record));

        ctx.lock_testbench = keep_testbench;
        const LoopStatus repaired = ctx.repair_until_clean();
        ctx.lock_testbench = false;
        if (repaired != LoopStatus::Success) {
            return {repaired, "review budget exhausted while repairing a revision"};
        }
    }
}

}  // namespace

void validate(const AutoDVConfig& config) {
    validate(config.review_config);
    try {
        validate(config.dv_budget);
    } catch (const Error& e) {
        fail(ErrorKind::ConfigError, e.what());
    }
    if (!(config.coverage_threshold > 0.0 && config.coverage_threshold <= 1.0)) {
        fail(ErrorKind::ConfigError, "coverage threshold must be in (0, 1]");
    }
}

AutoDVEngine::AutoDVEngine(AutoDVConfig config, std::shared_ptr<ChatAgent> code_agent,
                           std::shared_ptr<ChatAgent> review_agent, InteractionChannel* channel)
    : config_(std::move(config)),
      code_agent_(std::move(code_agent)),
      review_agent_(std::move(review_agent)),
      channel_(channel) {
    if (!code_agent_) fail(ErrorKind::PreconditionViolation, "no code agent");
    validate(config_.review_config.budget);
    validate(config_.dv_budget);
    if (!(config_.coverage_threshold > 0.0 && config_.coverage_threshold <= 1.0)) {
        fail(ErrorKind::PreconditionViolation, "coverage threshold must be in (0, 1]");
    }
}

LoopOutcome AutoDVEngine::run(const DesignTask& task, const Workspace& ws) {
    validate(task);
    // the verification loop always needs a testbench
    AutoReviewConfig review_config = config_.review_config;
    review_config.request_testbench = true;
    LoopContext ctx(review_config, *code_agent_, review_agent_.get(), task, ws);
    ctx.verify_budget = config_.dv_budget;

    LoopOutcome outcome;
    try {
        LoopStatus status = detail::review_phase(ctx, channel_);
        if (status == LoopStatus::Success) status = generate_testbench(ctx);
        if (status != LoopStatus::Success) {
            outcome = ctx.finish(status, "no clean bundle to verify");
        } else {
            const VerifyResult result = verify_phase(ctx, config_);
            outcome = ctx.finish(result.status, result.detail);
        }
    } catch (const Error& e) {
        outcome = ctx.finish(detail::status_for(e),
                             fmt::format("{}: {}", to_string(e.kind()), e.what()));
    }
    try {
        write_text_file(ws.root / "verification_summary.txt",
                        verification_summary(task, outcome, config_.coverage_threshold));
    } catch (const Error&) {
        // the outcome itself is already on disk
    }
    return outcome;
}

LoopOutcome run_autodv(const DesignTask& task, const AutoDVConfig& config, const Workspace& ws) {
    validate(config);
    const AutoReviewConfig& rc = config.review_config;
    auto code = make_agent(rc.code_agent);
    auto review = rc.review_agent ? make_agent(*rc.review_agent) : nullptr;
    StreamChannel terminal(std::cin, std::cerr);
    AutoDVEngine engine(config, code, review, rc.interactive ? &terminal : nullptr);
    return engine.run(task, ws);
}

VerificationVerdict verification_verdict(const LoopOutcome& outcome, double threshold) {
    const auto last = std::find_if(outcome.trace.rbegin(), outcome.trace.rend(),
                                   [](const IterationRecord& r) {
                                       return r.kind == IterationKind::Verify && r.sim;
                                   });
    if (last == outcome.trace.rend()) {
        fail(ErrorKind::MissingReports, "the outcome contains no simulation report");
    }
    VerificationVerdict verdict;
    verdict.functional_pass = last->sim->passed;
    verdict.met_coverage = last->coverage && last->coverage->aggregate >= threshold;
    return verdict;
}

std::string verification_summary(const DesignTask& task, const LoopOutcome& outcome,
                                 double threshold) {
    const auto reviews = std::count_if(outcome.trace.begin(), outcome.trace.end(),
                                       [](const auto& r) { return r.kind == IterationKind::Review; });
    std::string text;
    text += fmt::format("Task: {}\n", task.task_id);
    text += fmt::format("Status: {}\n", to_string(outcome.status));
    text += fmt::format("Iterations: {} ({} review, {} verification)\n", outcome.iterations_used,
                        reviews, outcome.iterations_used - reviews);
    text += fmt::format("Coverage threshold: {}\n", percent(threshold));
    try {
        const auto verdict = verification_verdict(outcome, threshold);
        text += fmt::format("Functional pass: {}\nCoverage met: {}\n",
                            verdict.functional_pass ? "yes" : "no",
                            verdict.met_coverage ? "yes" : "no");
    } catch (const Error&) {
        text += "Functional pass: not simulated\nCoverage met: not measured\n";
    }
    if (!outcome.detail.empty()) text += fmt::format("Detail: {}\n", outcome.detail);
    text += "\n";
    for (const auto& r : outcome.trace) {
        text += fmt::format("#{} {}:", r.index, to_string(r.kind));
        if (r.sim) {
            if (r.sim->passed) {
                text += " simulation passed";
            } else {
                text += fmt::format(" simulation failed ({} failed checks, {} mismatches{})",
                                    r.sim->failed_assertions.size(), r.sim->mismatch_count,
                                    r.sim->timed_out ? ", timed out" : "");
            }
            if (r.coverage) {
                text += fmt::format(", coverage {}", percent(r.coverage->aggregate));
                for (const auto& [metric, count] : r.coverage->metrics) {
                    text += fmt::format(" {} {}/{}", to_string(metric), count.covered, count.total);
                }
            }
            text += ";";
        }
        if (r.compile) {
            const auto errors = r.compile->error_count();
            text += errors == 0 ? " compile clean" : fmt::format(" compile {} errors", errors);
        } else if (!r.sim) {
            text += " no code extracted";
        }
        if (r.feedback) {
            text += fmt::format("; {} issue(s) for {}", r.feedback->issues.size(),
                                to_string(r.feedback->phase));
        }
        text += "\n";
    }
    return text;
}

std::string testbench_request_prompt(const DesignTask& task, const RtlBundle& bundle) {
    return fmt::format(
        "Design request:\n{}\n\nThe design below compiles. Write a self-checking testbench "
        "for it as a module without ports named tb. It must exercise every input "
        "combination or mode it can reach, call $dumpfile(\"dump.vcd\") and $dumpvars(0, tb), "
        "print each failed check as `ASSERTION FAILED at time <t>: <what went wrong>`, and end "
        "with $finish. Reply with the testbench only, in one ```verilog block.\n\n"
        "```verilog\n{}\n```",
        task.user_prompt, bundle.design_source);
}

}  // namespace rtlforge
