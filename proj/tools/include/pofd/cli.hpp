#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pofd::cli {

enum ExitCode : int { kOk = 0, kComputation = 1, kUsage = 2 };

/// Runs the `pofd` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat key=value file: '#' starts a comment, keys may be written with '-' or '_'
/// and an optional leading "--". Throws InputError on a malformed line.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

}  // namespace pofd::cli
