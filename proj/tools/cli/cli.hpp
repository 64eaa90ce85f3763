#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rtlforge/model.hpp"

namespace rtlforge::cli {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitBudget = 2;
inline constexpr int kExitNoCoverage = 3;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitDataset = 65;

int exit_code_for(LoopStatus status);

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics and interactive questions to `err`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace rtlforge::cli
