#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osb::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs the `osb` command line. Never throws; failures map to ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace osb::cli
