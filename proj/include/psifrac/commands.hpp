#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "psifrac/problem_file.hpp"

namespace psifrac {

inline constexpr const char* kReportVersion = "psifrac-report/1";

struct Report {
  std::string json;  // {version, problem_hash, grid_meta, window, results}
  std::string csv;   // empty when the command has no table
};

/// Subcommands understood by run_command.
const std::vector<std::string>& command_names();

/// Runs one subcommand. `problem` may be null for reproduce and sweep-alpha.
/// `options_json` is an object of command options (empty string for none).
Report run_command(std::string_view command, const LoadedProblem* problem, std::string_view options_json);

/// Built-in problem texts used by `reproduce` (example1, example2-psi1, ...).
std::string builtin_problem(std::string_view name);

}  // namespace psifrac
