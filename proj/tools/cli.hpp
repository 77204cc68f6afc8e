#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace alrnn::cli {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Parses `args` (without the program name) and runs the subcommand.
/// Regular output goes to `out`, usage text and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace alrnn::cli
