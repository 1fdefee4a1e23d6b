#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace transgap {

/// Parses and runs one CLI invocation. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Merges a JSON config object under the explicit arguments: every key that
/// is not already given as --key on the command line is appended as a flag
/// (booleans as bare flags, arrays comma-joined). Keys nested under the
/// subcommand's name apply to that subcommand only.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const std::string& json_text);

}  // namespace transgap
