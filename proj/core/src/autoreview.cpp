#include "rtlforge/autoreview.hpp"

#include <algorithm>
#include <iostream>

#include <boost/regex.hpp>
#include <fmt/format.h>

#include "loop_context.hpp"
#include "rtlforge/error.hpp"

namespace rtlforge {

namespace {

bool search(std::string_view text, const boost::regex& pattern) {
    try {
        return boost::regex_search(text.begin(), text.end(), pattern);
    } catch (const std::runtime_error&) {
        return false;
    }
}

bool embeds_module(std::string_view text) {
    return !declared_modules(text).empty() && text.find("endmodule") != std::string_view::npos;
}

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

constexpr std::string_view kElicitationSystemPrompt =
    "You are an RTL design engineer gathering requirements before writing "
    "Verilog. Ask only the questions needed to pin down the interface (port "
    "names, widths, clocking, reset) and the behavior. Ask at most five short "
    "numbered questions per reply. When you have enough information reply "
    "with the single word READY.";

bool is_ready(std::string_view reply) { return trim(reply).starts_with("READY"); }

std::optional<RtlBundle> bundle_from_provided(const std::string& rtl) {
    RtlBundle bundle;
    try {
        const CodeSplit split = split_code(rtl);
        bundle.design_source = split.design_source;
        bundle.testbench_source = split.testbench_source;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::AmbiguousBundle && e.kind() != ErrorKind::NoCodeFound) throw;
        bundle.design_source = rtl;
    }
    bundle.top_module = top_module_of(bundle.design_source);
    if (!is_hdl_identifier(bundle.top_module)) return std::nullopt;
    return bundle;
}

}  // namespace

void validate(const AutoReviewConfig& config) {
    try {
        validate(config.budget);
    } catch (const Error& e) {
        fail(ErrorKind::ConfigError, e.what());
    }
    validate(config.code_agent);
    if (config.review_agent) validate(*config.review_agent);
    validate(config.tool_profile);
    if (config.context_budget_chars == 0) fail(ErrorKind::ConfigError, "context budget is zero");
    if (config.issue_cap == 0) fail(ErrorKind::ConfigError, "issue cap is zero");
}

PromptCase classify_prompt(std::string_view prompt, const std::optional<std::string>& provided_rtl) {
    static const boost::regex kImperative(
        R"(\b(compile|verify|test|simulate|check|lint|debug)\b)", boost::regex::perl | boost::regex::icase);
    static const boost::regex kPortToken(
        R"(\b(input|output|inout|ports?)\b|[A-Za-z_]\w*\s*\[\s*\d+\s*:\s*\d+\s*\])",
        boost::regex::perl | boost::regex::icase);
    static const boost::regex kBehavior(
        R"(\b(when|whenever|if|while|after|until|should|must|resets?|counts?|increments?|)"
        R"(decrements?|adds?|subtracts?|sums?|multipl\w*|shifts?|rotates?|stores?|holds?|)"
        R"(wraps?|toggles?|selects?|sets?|clears?|asserts?|outputs?|computes?|compares?|)"
        R"(equals?|implements?|returns?|drives?|latch\w*|registers?|synchronous|)"
        R"(asynchronous|edge|posedge|negedge|otherwise|else)\b)",
        boost::regex::perl | boost::regex::icase);

    if (provided_rtl && !trim(*provided_rtl).empty()) return PromptCase::TaskBased;
    if (search(prompt, kImperative) && embeds_module(prompt)) return PromptCase::TaskBased;
    if (search(prompt, kPortToken) && search(prompt, kBehavior)) return PromptCase::Detailed;
    return PromptCase::Vague;
}

DesignTask make_design_task(std::string task_id, std::string prompt,
                            std::optional<std::string> provided_rtl) {
    DesignTask task;
    task.task_id = std::move(task_id);
    task.prompt_case = classify_prompt(prompt, provided_rtl);
    if (task.prompt_case == PromptCase::TaskBased && !provided_rtl) {
        try {
            const CodeSplit split = split_code(prompt);
            provided_rtl = split.testbench_source.empty()
                               ? split.design_source
                               : split.design_source + "\n\n" + split.testbench_source;
        } catch (const Error&) {
            const auto from = prompt.find("module");
            const auto to = prompt.rfind("endmodule");
            provided_rtl = prompt.substr(from, to + 9 - from);
        }
    }
    task.user_prompt = std::move(prompt);
    task.provided_rtl = std::move(provided_rtl);
    validate(task);
    return task;
}

Elicitation elicit_details(const std::string& prompt, ChatAgent& agent,
                           InteractionChannel* channel, const AutoReviewConfig& config,
                           int max_calls) {
    if (!config.interactive || channel == nullptr) {
        fail(ErrorKind::InteractionUnavailable,
             "the request is vague and no interactive channel is available");
    }
    Elicitation result;
    result.transcript.agent_role = AgentRole::Code;
    result.transcript.messages.push_back(
        ChatMessage{ChatRole::System, std::string(kElicitationSystemPrompt)});
    result.transcript.messages.push_back(ChatMessage{
        ChatRole::User, fmt::format("Design request:\n{}\n\nWhat do you need to know before "
                                    "writing the Verilog?",
                                    prompt)});
    std::vector<std::string> answers;
    for (int round = 1; round <= kMaxClarificationRounds && result.agent_calls < max_calls;
         ++round) {
        ++result.agent_calls;
        ChatMessage reply = agent.send_chat(result.transcript);
        reply.role = ChatRole::Assistant;
        result.transcript.messages.push_back(reply);
        result.rounds = round;
        if (is_ready(reply.content)) break;
        auto answer = channel->answer(reply.content);
        if (!answer || trim(*answer).empty()) break;
        answers.push_back(trim(*answer));
        result.transcript.messages.push_back(ChatMessage{ChatRole::User, answers.back()});
    }
    result.enriched_prompt = prompt;
    if (!answers.empty()) {
        result.enriched_prompt += "\n\nClarifications from the user:";
        for (const auto& a : answers) result.enriched_prompt += "\n- " + a;
    }
    return result;
}

std::string code_system_prompt(bool request_testbench) {
    std::string text =
        "You are an expert RTL design engineer. Write synthesizable Verilog that "
        "compiles with Icarus Verilog in -g2012 mode. Put all design modules in one "
        "```verilog fenced block.";
    if (request_testbench) {
        text +=
            " Put the testbench in a second ```verilog fenced block. The testbench is a "
            "module without ports named tb that instantiates the design, calls "
            "$dumpfile(\"dump.vcd\") and $dumpvars(0, tb), prints every failed check on "
            "its own line as `ASSERTION FAILED at time <t>: <what went wrong>`, and ends "
            "with $finish.";
    }
    text += " When asked for fixes, reply with the complete corrected code, never a diff.";
    return text;
}

std::string generation_prompt(const DesignTask& task, const std::string& design_request,
                              bool request_testbench) {
    std::string text = fmt::format("Design request:\n{}\n\n", trim(design_request));
    if (task.provided_rtl && design_request.find(*task.provided_rtl) == std::string::npos) {
        text += fmt::format("Existing RTL:\n```verilog\n{}\n```\n\n", trim(*task.provided_rtl));
    }
    switch (task.prompt_case) {
        case PromptCase::Detailed:
            text += "Implement this design.";
            break;
        case PromptCase::Vague:
            text +=
                "Some details are not specified. Choose sensible values and list your "
                "assumptions in a comment at the top of the design.";
            break;
        case PromptCase::TaskBased:
            text += "Fix the existing RTL where needed so that it compiles, keeping its behavior.";
            break;
    }
    text += request_testbench ? " Also write a self-checking testbench for it."
                              : " Reply with the design only.";
    return text;
}

std::string disambiguation_prompt() {
    return "I could not tell which module is the testbench in your last reply. Send the same "
           "code again as exactly two ```verilog fenced blocks: the first holds only the design "
           "modules, the second holds only the testbench module, which has no ports.";
}

std::string missing_code_prompt() {
    return "Your last reply contained no Verilog module. Reply with the complete code in "
           "```verilog fenced blocks.";
}

namespace detail {

LoopStatus review_phase(LoopContext& ctx, InteractionChannel* channel) {
    const DesignTask& task = ctx.task;
    IterationRecord record;
    record.kind = IterationKind::Review;
    std::string design_request = task.user_prompt;

    if (task.prompt_case == PromptCase::Vague && ctx.config.interactive) {
        // clarification is charged to agent calls, not iterations
        const int spare = std::min(kMaxClarificationRounds, ctx.calls_left(record) - 1);
        if (spare > 0) {
            Elicitation e = elicit_details(task.user_prompt, ctx.code, channel, ctx.config, spare);
            record.agent_calls += e.agent_calls;
            design_request = e.enriched_prompt;
            ctx.side_transcripts.push_back(std::move(e.transcript));
        }
    }

    if (task.prompt_case == PromptCase::TaskBased && task.provided_rtl) {
        if (auto candidate = bundle_from_provided(*task.provided_rtl)) {
            record.index = ctx.next_index();
            ctx.compile_into(record, *candidate, ctx.iteration_dir(record.index));
            ctx.push(std::move(record));
            return ctx.repair_until_clean();
        }
    }

    bool asked = false;
    while (!ctx.state) {
        if (ctx.remaining(IterationKind::Review).iterations_left <= 0) {
            return LoopStatus::BudgetExhausted;
        }
        record.index = ctx.next_index();
        record.kind = IterationKind::Review;
        try {
            record.prompt_sent = asked ? missing_code_prompt()
                                       : generation_prompt(task, design_request,
                                                           ctx.config.request_testbench);
            record.agent_response = ctx.ask_code(record.prompt_sent, record);
        } catch (const BudgetStop&) {
            if (record.agent_calls > 0) ctx.push(std::move(record));
            return LoopStatus::BudgetExhausted;
        }
        asked = true;
        if (auto candidate = ctx.extract(record.agent_response, record, false)) {
            ctx.compile_into(record, *candidate, ctx.iteration_dir(record.index));
        }
        ctx.push(std::move(record));
        record = IterationRecord{};
    }
    return ctx.repair_until_clean();
}

}  // namespace detail

AutoReviewEngine::AutoReviewEngine(AutoReviewConfig config, std::shared_ptr<ChatAgent> code_agent,
                                   std::shared_ptr<ChatAgent> review_agent,
                                   InteractionChannel* channel)
    : config_(std::move(config)),
      code_agent_(std::move(code_agent)),
      review_agent_(std::move(review_agent)),
      channel_(channel) {
    if (!code_agent_) fail(ErrorKind::PreconditionViolation, "no code agent");
    validate(config_.budget);
}

LoopOutcome AutoReviewEngine::run(const DesignTask& task, const Workspace& ws) {
    validate(task);
    detail::LoopContext ctx(config_, *code_agent_, review_agent_.get(), task, ws);
    try {
        const LoopStatus status = detail::review_phase(ctx, channel_);
        return ctx.finish(status, status == LoopStatus::BudgetExhausted
                                      ? "review budget exhausted before a clean compile"
                                      : "");
    } catch (const Error& e) {
        return ctx.finish(detail::status_for(e), fmt::format("{}: {}", to_string(e.kind()), e.what()));
    }
}

LoopOutcome run_autoreview(const DesignTask& task, const AutoReviewConfig& config,
                           const Workspace& ws) {
    validate(config);
    auto code = make_agent(config.code_agent);
    auto review = config.review_agent ? make_agent(*config.review_agent) : nullptr;
    StreamChannel terminal(std::cin, std::cerr);
    AutoReviewEngine engine(config, code, review, config.interactive ? &terminal : nullptr);
    return engine.run(task, ws);
}

}  // namespace rtlforge
