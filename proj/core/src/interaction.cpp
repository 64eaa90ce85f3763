#include "rtlforge/interaction.hpp"

#include <istream>
#include <ostream>

namespace rtlforge {

ScriptedChannel::ScriptedChannel(std::vector<std::string> answers)
    : answers_(answers.begin(), answers.end()) {}

std::optional<std::string> ScriptedChannel::answer(const std::string& questions) {
    std::lock_guard lock(mutex_);
    seen_.push_back(questions);
    if (answers_.empty()) return std::nullopt;
    std::string next = std::move(answers_.front());
    answers_.pop_front();
    return next;
}

StreamChannel::StreamChannel(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

std::optional<std::string> StreamChannel::answer(const std::string& questions) {
    out_ << questions << "\n\nYour answer (finish with an empty line):\n" << std::flush;
    std::string text;
    std::string line;
    while (std::getline(in_, line) && !line.empty()) {
        if (!text.empty()) text += '\n';
        text += line;
    }
    if (text.empty()) return std::nullopt;
    return text;
}

}  // namespace rtlforge
