#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hcmr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (args[0] is the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "0..7" (inclusive range) or "0,2,5".
std::vector<int> parse_budgets(const std::string& text);

}  // namespace hcmr::cli
