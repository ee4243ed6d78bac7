#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "psifrac/expr.hpp"
#include "psifrac/frac_ops.hpp"
#include "psifrac/solvers.hpp"
#include "psifrac/variational.hpp"

namespace psifrac {

/// Line-oriented `[section]` / `key = value` document. Values are quoted
/// strings or bare tokens; `#` starts a comment outside quotes.
struct ProblemFile {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::string source;

  const Entry* find(const std::string& section, const std::string& key) const;
};

/// Syntax only: sections, keys and quoting. Unknown sections and keys are
/// rejected with the offending line.
ProblemFile parse_problem_file(std::string_view text);

struct LoadedProblem {
  ProblemSpec spec;
  std::optional<Path> candidate;
  std::optional<double> T;  // [candidate] T
  QuadGrid grid;
  GridMeta meta;
  RootConfig time_root;
  RootConfig order_root;
  MinimizeConfig minimize;
  std::string hash;  // FNV-1a of the source text, hex
  std::map<std::string, std::string> expressions;  // printed forms of the parsed expressions
};

/// Parses and validates everything (kind-dependent sections, variables per
/// slot, numeric ranges) before any numerics run.
LoadedProblem load_problem(std::string_view text);
LoadedProblem load_problem_file(const std::string& path);

std::string fnv1a_hex(std::string_view text);

}  // namespace psifrac
