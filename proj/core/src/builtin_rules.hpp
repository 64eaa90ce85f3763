#pragma once

#include <span>
#include <string_view>
#include <utility>

namespace rtlforge::detail {

// (tool_id, JSON text) pairs generated from config/rules at configure time.
std::span<const std::pair<std::string_view, std::string_view>> builtin_rule_texts();

}  // namespace rtlforge::detail
