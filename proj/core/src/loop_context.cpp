#include "loop_context.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "rtlforge/hdl_text.hpp"

namespace rtlforge::detail {

namespace {

constexpr std::string_view kReviewSystemPrompt =
    "You are a senior hardware verification engineer. You receive the tool "
    "reports of a generated Verilog design. For every numbered issue explain "
    "the most likely root cause and the concrete change that fixes it. Be "
    "brief and do not rewrite the whole design.";

std::size_t transcript_chars(const Transcript& t) {
    return std::accumulate(t.messages.begin(), t.messages.end(), std::size_t{0},
                           [](std::size_t n, const ChatMessage& m) { return n + m.content.size(); });
}

}  // namespace

LoopContext::LoopContext(const AutoReviewConfig& cfg, ChatAgent& code_agent,
                         ChatAgent* review_agent, const DesignTask& t, const Workspace& w)
    : config(cfg),
      code(code_agent),
      review(review_agent),
      task(t),
      ws(w),
      profile(with_timeout_cap(cfg.tool_profile, cfg.budget.tool_timeout_seconds)),
      review_budget(cfg.budget) {
    transcript.agent_role = AgentRole::Code;
    transcript.messages.push_back(
        ChatMessage{ChatRole::System, code_system_prompt(cfg.request_testbench)});
}

BudgetLeft LoopContext::remaining(IterationKind kind) const {
    std::vector<IterationRecord> of_kind;
    std::copy_if(trace.begin(), trace.end(), std::back_inserter(of_kind),
                 [&](const IterationRecord& r) { return r.kind == kind; });
    const Budget& budget =
        kind == IterationKind::Verify && verify_budget ? *verify_budget : review_budget;
    return budget_remaining(budget, of_kind);
}

int LoopContext::calls_left(const IterationRecord& record) const {
    return remaining(record.kind).calls_left - record.agent_calls;
}

Workspace LoopContext::iteration_dir(int index, const std::string& sub) const {
    Workspace dir{ws.root, ws.task_id};
    dir.root = ws.subdir(fmt::format("iter_{:03d}", index));
    if (!sub.empty()) dir.root = dir.subdir(sub);
    return dir;
}

void LoopContext::evict_old_exchanges() {
    // system, first request and first reply are kept; after them the
    // transcript alternates request/reply and ends with the pending request
    constexpr std::size_t kKept = 3;
    while (transcript_chars(transcript) > config.context_budget_chars &&
           transcript.messages.size() >= kKept + 3) {
        transcript.messages.erase(transcript.messages.begin() + kKept,
                                  transcript.messages.begin() + kKept + 2);
    }
}

std::string LoopContext::ask_code(const std::string& prompt, IterationRecord& record) {
    if (calls_left(record) <= 0) throw BudgetStop{};
    transcript.messages.push_back(ChatMessage{ChatRole::User, prompt});
    evict_old_exchanges();
    ++record.agent_calls;
    ChatMessage reply = code.send_chat(transcript);
    reply.role = ChatRole::Assistant;
    transcript.messages.push_back(reply);
    return reply.content;
}

std::optional<std::string> LoopContext::analyse(const ReviewFeedback& feedback,
                                                std::string_view raw_log,
                                                IterationRecord& record) {
    // keep at least one call for the code agent
    if (review == nullptr || calls_left(record) < 2) return std::nullopt;
    Transcript t;
    t.agent_role = AgentRole::Review;
    t.messages.push_back(ChatMessage{ChatRole::System, std::string(kReviewSystemPrompt)});
    t.messages.push_back(ChatMessage{
        ChatRole::User, fmt::format("Design request:\n{}\n\n{}", task.user_prompt,
                                    render_analysis_request(feedback, raw_log))});
    ++record.agent_calls;
    ChatMessage reply = review->send_chat(t);
    reply.role = ChatRole::Assistant;
    t.messages.push_back(reply);
    side_transcripts.push_back(std::move(t));
    return reply.content;
}

std::optional<RtlBundle> LoopContext::extract(const std::string& response,
                                              IterationRecord& record, bool keep_testbench) {
    ExtractOptions options;
    if (state) options.known_testbench_modules = declared_modules(state->bundle.testbench_source);

    std::optional<CodeSplit> split;
    try {
        split = split_code(response, options);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::AmbiguousBundle) return std::nullopt;
        try {
            const std::string prompt = disambiguation_prompt();
            const std::string again = ask_code(prompt, record);
            record.prompt_sent += "\n\n" + prompt;
            record.agent_response += "\n\n" + again;
            split = split_code(again, options);
        } catch (const BudgetStop&) {
            return std::nullopt;
        } catch (const Error& retry) {
            if (retry.kind() != ErrorKind::AmbiguousBundle &&
                retry.kind() != ErrorKind::NoCodeFound) {
                throw;
            }
            return std::nullopt;
        }
    }

    RtlBundle bundle;
    const RtlBundle* previous = state ? &state->bundle : nullptr;
    if (previous && split->testbench_source.empty()) {
        // a lone testbench block, e.g. a coverage revision, is not a design
        const auto modules = declared_modules(split->design_source);
        const auto& known = options.known_testbench_modules;
        const bool lone_testbench =
            modules.size() == 1 && modules.front() != previous->top_module &&
            (std::find(known.begin(), known.end(), modules.front()) != known.end() ||
             module_is_portless(split->design_source));
        if (lone_testbench) std::swap(split->design_source, split->testbench_source);
    }
    bundle.design_source = split->design_source;
    if (declared_modules(bundle.design_source).empty() && previous) {
        bundle.design_source = previous->design_source;
    }
    bundle.testbench_source = split->testbench_source;
    if (previous && (keep_testbench || bundle.testbench_source.empty())) {
        bundle.testbench_source = previous->testbench_source;
    }
    bundle.top_module = top_module_of(bundle.design_source);
    if (bundle.design_source.empty() || !is_hdl_identifier(bundle.top_module)) return std::nullopt;
    return bundle;
}

void LoopContext::compile_into(IterationRecord& record, const RtlBundle& candidate,
                               const Workspace& dir) {
    CompileReport report = rtlforge::compile(profile, candidate, dir);
    // verify records keep the simulation feedback that led to the revision
    if (report.error_count() > 0 && record.kind == IterationKind::Review) {
        record.feedback = distill(report, std::nullopt, std::nullopt,
                                  DistillOptions{config.issue_cap, 1.0});
    }
    record.compile = report;
    state = GateState{candidate, dir, std::move(report)};
}

void LoopContext::push(IterationRecord record) {
    const Workspace dir = iteration_dir(record.index);
    if (!record.prompt_sent.empty()) write_text_file(dir.root / "prompt.txt", record.prompt_sent);
    if (!record.agent_response.empty()) {
        write_text_file(dir.root / "response.txt", record.agent_response);
    }
    trace.push_back(std::move(record));
}

LoopStatus LoopContext::repair_until_clean() {
    while (state && state->compile.error_count() > 0) {
        const BudgetLeft left = remaining(IterationKind::Review);
        if (left.iterations_left <= 0 || left.calls_left <= 0) return LoopStatus::BudgetExhausted;

        IterationRecord record;
        record.index = next_index();
        record.kind = IterationKind::Review;
        const ReviewFeedback feedback = distill(state->compile, std::nullopt, std::nullopt,
                                                DistillOptions{config.issue_cap, 1.0});
        try {
            const auto analysis = analyse(feedback, state->compile.raw_log, record);
            record.prompt_sent = render_review_prompt(feedback, state->bundle, analysis);
            record.agent_response = ask_code(record.prompt_sent, record);
        } catch (const BudgetStop&) {
            return LoopStatus::BudgetExhausted;
        }
        if (auto candidate = extract(record.agent_response, record, lock_testbench)) {
            compile_into(record, *candidate, iteration_dir(record.index));
        }
        push(std::move(record));
    }
    return LoopStatus::Success;
}

LoopOutcome LoopContext::finish(LoopStatus status, std::string detail) {
    LoopOutcome outcome;
    outcome.status = status;
    outcome.iterations_used = static_cast<int>(trace.size());
    outcome.trace = trace;
    outcome.detail = std::move(detail);
    if (state) outcome.final_bundle = state->bundle;
    validate(outcome);
    try {
        write_text_file(ws.root / "outcome.json", to_canonical_json(outcome));
        if (transcript.messages.size() > 1) record_transcript(transcript, ws.root);
        for (const auto& side : side_transcripts) record_transcript(side, ws.root);
    } catch (const Error& e) {
        if (outcome.detail.empty()) outcome.detail = e.what();
    }
    return outcome;
}

LoopStatus status_for(const Error& error) {
    switch (error.kind()) {
        case ErrorKind::TransportError:
        case ErrorKind::ProtocolError:
        case ErrorKind::ReplayExhausted:
        case ErrorKind::AgentFailure:
        case ErrorKind::InteractionUnavailable:
            return LoopStatus::AgentFailure;
        default:
            return LoopStatus::ToolFailure;
    }
}

}  // namespace rtlforge::detail
