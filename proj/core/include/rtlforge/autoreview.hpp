#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>

#include "rtlforge/distiller.hpp"
#include "rtlforge/gateway.hpp"
#include "rtlforge/harness.hpp"
#include "rtlforge/interaction.hpp"
#include "rtlforge/model.hpp"

namespace rtlforge {

struct AutoReviewConfig {
    Budget budget;
    AgentConfig code_agent = default_agent_config(AgentRole::Code);
    // Without a review agent the distilled issues go to the code agent as is.
    std::optional<AgentConfig> review_agent;
    ToolProfile tool_profile;
    // Vague prompts are clarified with the user only when interactive.
    bool interactive = false;
    // Ask for a self-checking testbench alongside the design.
    bool request_testbench = true;
    // Characters of code-agent transcript kept before the oldest review
    // exchanges are dropped.
    std::size_t context_budget_chars = 120'000;
    std::size_t issue_cap = 10;
};

void validate(const AutoReviewConfig& config);

PromptCase classify_prompt(std::string_view prompt,
                           const std::optional<std::string>& provided_rtl = std::nullopt);

/// Builds a task from raw user input. A task-based prompt that embeds its
/// RTL gets that code as provided_rtl.
DesignTask make_design_task(std::string task_id, std::string prompt,
                            std::optional<std::string> provided_rtl = std::nullopt);

struct Elicitation {
    std::string enriched_prompt;
    int agent_calls = 0;
    int rounds = 0;
    Transcript transcript;
};

inline constexpr int kMaxClarificationRounds = 3;

/// Runs the clarifying dialogue for a vague prompt: the agent asks, the
/// channel answers, for at most three rounds or until the agent replies
/// READY. `max_calls` bounds agent calls. Throws InteractionUnavailable
/// when not interactive.
Elicitation elicit_details(const std::string& prompt, ChatAgent& agent,
                           InteractionChannel* channel, const AutoReviewConfig& config,
                           int max_calls = kMaxClarificationRounds);

/// The syntax-repair loop: generate, compile, distill, re-prompt.
class AutoReviewEngine {
public:
    AutoReviewEngine(AutoReviewConfig config, std::shared_ptr<ChatAgent> code_agent,
                     std::shared_ptr<ChatAgent> review_agent = nullptr,
                     InteractionChannel* channel = nullptr);

    /// Never throws for agent or tool trouble; those end the loop with
    /// AgentFailure or ToolFailure. Artifacts go under ws.root.
    LoopOutcome run(const DesignTask& task, const Workspace& ws);

private:
    AutoReviewConfig config_;
    std::shared_ptr<ChatAgent> code_agent_;
    std::shared_ptr<ChatAgent> review_agent_;
    InteractionChannel* channel_;
};

/// Builds agents from config. Interactive runs read answers from stdin.
LoopOutcome run_autoreview(const DesignTask& task, const AutoReviewConfig& config,
                           const Workspace& ws);

// Fixed prompt texts, exposed so tests and replay fixtures can match them.
std::string code_system_prompt(bool request_testbench);
std::string generation_prompt(const DesignTask& task, const std::string& design_request,
                              bool request_testbench);
std::string disambiguation_prompt();
std::string missing_code_prompt();

}  // namespace rtlforge
