#pragma once

#include <deque>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rtlforge {

/// Where answers to clarifying questions come from.
class InteractionChannel {
public:
    virtual ~InteractionChannel() = default;

    /// Shows the agent's questions and returns the user's answer, or
    /// nullopt when the user has nothing more to say.
    virtual std::optional<std::string> answer(const std::string& questions) = 0;
};

/// Replays canned answers in order; used by tests and batch runs.
class ScriptedChannel final : public InteractionChannel {
public:
    explicit ScriptedChannel(std::vector<std::string> answers);

    std::optional<std::string> answer(const std::string& questions) override;

    const std::vector<std::string>& questions_seen() const { return seen_; }

private:
    std::deque<std::string> answers_;
    std::vector<std::string> seen_;
    std::mutex mutex_;
};

/// Prints questions to `out` and reads an answer from `in`, terminated by
/// an empty line or end of input.
class StreamChannel final : public InteractionChannel {
public:
    StreamChannel(std::istream& in, std::ostream& out);

    std::optional<std::string> answer(const std::string& questions) override;

private:
    std::istream& in_;
    std::ostream& out_;
};

}  // namespace rtlforge
