#pragma once

// State shared by the review and verification loops of one run.

#include <optional>
#include <string>
#include <vector>

#include "rtlforge/autoreview.hpp"
#include "rtlforge/error.hpp"

namespace rtlforge::detail {

// Thrown when an agent call would exceed the budget of the current record.
struct BudgetStop {};

// A bundle together with its latest compile and the directory it was
// compiled in.
struct GateState {
    RtlBundle bundle;
    Workspace dir;
    CompileReport compile;
};

class LoopContext {
public:
    LoopContext(const AutoReviewConfig& config, ChatAgent& code, ChatAgent* review,
                const DesignTask& task, const Workspace& ws);

    const AutoReviewConfig& config;
    ChatAgent& code;
    ChatAgent* review;
    const DesignTask& task;
    Workspace ws;
    ToolProfile profile;
    Budget review_budget;
    std::optional<Budget> verify_budget;

    Transcript transcript;
    std::vector<Transcript> side_transcripts;
    std::vector<IterationRecord> trace;
    std::optional<GateState> state;
    // Syntax repairs must not touch the testbench while set.
    bool lock_testbench = false;

    int next_index() const { return static_cast<int>(trace.size()) + 1; }
    BudgetLeft remaining(IterationKind kind) const;
    /// Calls still available to `record`, counting those it already made.
    int calls_left(const IterationRecord& record) const;
    Workspace iteration_dir(int index, const std::string& sub = {}) const;

    /// Continues the code-agent transcript with `prompt` and returns the reply.
    std::string ask_code(const std::string& prompt, IterationRecord& record);
    /// Asks the review agent to explain the issues; nullopt without one or
    /// when no call can be spared for it.
    std::optional<std::string> analyse(const ReviewFeedback& feedback, std::string_view raw_log,
                                       IterationRecord& record);
    /// Splits a reply and merges it into the current bundle. One
    /// disambiguation re-prompt is sent for an ambiguous reply.
    std::optional<RtlBundle> extract(const std::string& response, IterationRecord& record,
                                     bool keep_testbench);
    /// Compiles `candidate` in `dir`, storing report and syntax feedback in
    /// `record` and making it the current state.
    void compile_into(IterationRecord& record, const RtlBundle& candidate, const Workspace& dir);
    void push(IterationRecord record);

    /// Review iterations until the current state compiles cleanly or the
    /// review budget is gone. Returns Success or BudgetExhausted.
    LoopStatus repair_until_clean();

    LoopOutcome finish(LoopStatus status, std::string detail);

private:
    void evict_old_exchanges();
};

LoopStatus status_for(const Error& error);

/// Generation followed by syntax repair; leaves a clean bundle in
/// ctx.state on Success.
LoopStatus review_phase(LoopContext& ctx, InteractionChannel* channel);

}  // namespace rtlforge::detail
