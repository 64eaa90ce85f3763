#pragma once

#include <memory>
#include <string>

#include "rtlforge/autoreview.hpp"

namespace rtlforge {

struct AutoDVConfig {
    AutoReviewConfig review_config;
    double coverage_threshold = 0.90;  // met when aggregate >= threshold
    Budget dv_budget;
    // When false, functional-repair revisions may only change the design.
    bool regenerate_testbench = true;
};

void validate(const AutoDVConfig& config);

/// The verification loop: a clean bundle from the review loop is simulated
/// and scored for coverage, and failures or gaps go back to the code agent
/// until the testbench passes with enough coverage or the budget runs out.
class AutoDVEngine {
public:
    AutoDVEngine(AutoDVConfig config, std::shared_ptr<ChatAgent> code_agent,
                 std::shared_ptr<ChatAgent> review_agent = nullptr,
                 InteractionChannel* channel = nullptr);

    LoopOutcome run(const DesignTask& task, const Workspace& ws);

private:
    AutoDVConfig config_;
    std::shared_ptr<ChatAgent> code_agent_;
    std::shared_ptr<ChatAgent> review_agent_;
    InteractionChannel* channel_;
};

LoopOutcome run_autodv(const DesignTask& task, const AutoDVConfig& config, const Workspace& ws);

struct VerificationVerdict {
    bool met_coverage = false;
    bool functional_pass = false;

    friend bool operator==(const VerificationVerdict&, const VerificationVerdict&) = default;
};

/// Reads the last simulated verification record of an outcome. Throws
/// MissingReports when nothing was simulated.
VerificationVerdict verification_verdict(const LoopOutcome& outcome, double threshold);

/// Plain-text account of a verification run.
std::string verification_summary(const DesignTask& task, const LoopOutcome& outcome,
                                 double threshold);

std::string testbench_request_prompt(const DesignTask& task, const RtlBundle& bundle);

}  // namespace rtlforge
