#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace rtlforge {

/// Blanks out comments and string-literal contents with spaces, keeping
/// newlines so offsets and line numbers still line up with the original.
std::string strip_hdl_comments(std::string_view source);

/// True when the first module declared in source has no port list
/// ("module tb;" or "module tb();"), the usual shape of a testbench.
bool module_is_portless(std::string_view source);

/// Instance name under which testbench instantiates module_name, if any.
std::optional<std::string> find_instance_name(std::string_view testbench,
                                              std::string_view module_name);

std::string regex_escape(std::string_view text);

}  // namespace rtlforge
