#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psifrac/psifrac.h"

namespace {

using json = nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

int fail(const std::string& code, const std::string& message, int exit_code) {
  json err{{"error", {{"code", code}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return exit_code;
}

int fail(psifrac_status s) {
  return fail(psifrac_status_name(s), psifrac_last_error(),
              psifrac_status_is_validation(s) ? kExitValidation : kExitNumerical);
}

struct Args {
  std::string problem;
  std::string csv;
  std::optional<std::string> op, mode, form, psi, target;
  std::optional<double> alpha, T, lambda;
  std::optional<int> samples, seed, max_evals;
  std::vector<double> t;
};

void add_options(CLI::App* sub, const std::string& name, Args& a) {
  if (name != "reproduce") {
    auto* p = sub->add_option("--problem", a.problem, "problem file");
    if (name != "sweep-alpha") p->required();
  }
  sub->add_option("--csv", a.csv, "write the node or sweep table as CSV");
  if (name == "op-eval") {
    sub->add_option("--op", a.op, "frac_integral_left | frac_integral_right | caputo_left | caputo_right | rl_right");
    sub->add_option("--alpha", a.alpha, "order (default: the problem's)");
    sub->add_option("--t", a.t, "evaluation times (default: grid nodes)");
  }
  if (name == "op-eval" || name == "el-check" || name == "iso-check" || name == "legendre" || name == "delay-check" ||
      name == "highorder-check") {
    sub->add_option("--T", a.T, "terminal time (default: [candidate] T, else b)");
  }
  if (name == "el-check") sub->add_option("--mode", a.mode, "rl | caputo");
  if (name == "iso-check") sub->add_option("--lambda", a.lambda, "multiplier (default: lambda_hint)");
  if (name == "order-opt" || name == "reproduce" || name == "sweep-alpha") {
    sub->add_option("--form", a.form, "derived | printed");
  }
  if (name == "reproduce" || name == "sweep-alpha") sub->add_option("--psi", a.psi, "psi1 | psi2");
  if (name == "reproduce") {
    sub->add_option("target", a.target, "example1 | example2 | example3 | counterexample")->required();
  }
  if (name == "sweep-alpha") sub->add_option("--samples", a.samples, "number of alpha samples");
  if (name == "direct-min") {
    sub->add_option("--seed", a.seed, "simplex seed");
    sub->add_option("--max-evals", a.max_evals, "evaluation budget");
  }
}

json options_of(const Args& a) {
  json o = json::object();
  if (a.op) o["op"] = *a.op;
  if (a.mode) o["mode"] = *a.mode;
  if (a.form) o["form"] = *a.form;
  if (a.psi) o["psi"] = *a.psi;
  if (a.target) o["target"] = *a.target;
  if (a.alpha) o["alpha"] = *a.alpha;
  if (a.T) o["T"] = *a.T;
  if (a.lambda) o["lambda"] = *a.lambda;
  if (a.samples) o["samples"] = *a.samples;
  if (a.seed) o["seed"] = *a.seed;
  if (a.max_evals) o["max_evals"] = *a.max_evals;
  if (!a.t.empty()) o["t"] = a.t;
  return o;
}

}  // namespace

const std::map<std::string, std::string> kAbout{
    {"op-eval", "evaluate a fractional operator on the candidate"},
    {"el-check", "Euler-Lagrange and transversality residuals"},
    {"iso-check", "isoperimetric residuals, solving for T when it is not given"},
    {"legendre", "minimum of d2L/dd2 along the candidate"},
    {"delay-check", "residuals of a delay problem"},
    {"highorder-check", "residuals of a high-order problem"},
    {"order-opt", "optimal fractional order of the power family"},
    {"terminal-time", "solve L[x](T) = 0 for the terminal time"},
    {"direct-min", "Nelder-Mead over power-series paths and T"},
    {"sweep-alpha", "tabulate J(x*, T*(alpha), alpha) over the order bracket"},
    {"reproduce", "run a built-in example"},
};

int main(int argc, char** argv) {
  CLI::App app{"psi-fractional calculus of variations toolkit"};
  app.set_version_flag("--version", psifrac_version());
  app.require_subcommand(1);
  Args args;
  std::map<CLI::App*, std::string> subs;
  for (size_t i = 0; i < psifrac_command_count(); ++i) {
    const std::string name = psifrac_command_name(i);
    const auto about = kAbout.find(name);
    auto* sub = app.add_subcommand(name, about == kAbout.end() ? "" : about->second);
    add_options(sub, name, args);
    subs[sub] = name;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitValidation);
  }

  std::string command;
  for (const auto& [sub, name] : subs) {
    if (sub->parsed()) command = name;
  }

  psifrac_problem* problem = nullptr;
  if (!args.problem.empty()) {
    if (const auto s = psifrac_problem_load_file(args.problem.c_str(), &problem); s != PSIFRAC_OK) return fail(s);
  }
  psifrac_report* report = nullptr;
  const auto status = psifrac_run(command.c_str(), problem, options_of(args).dump().c_str(), &report);
  psifrac_problem_free(problem);
  if (status != PSIFRAC_OK) return fail(status);

  std::cout << psifrac_report_json(report) << '\n';
  int code = 0;
  if (!args.csv.empty()) {
    const std::string csv = psifrac_report_csv(report);
    if (csv.empty()) {
      code = fail("io", command + " produces no table for --csv", kExitValidation);
    } else {
      std::ofstream out(args.csv, std::ios::binary);
      out << csv;
      if (!out) code = fail("io", "cannot write '" + args.csv + "'", kExitValidation);
    }
  }
  psifrac_report_free(report);
  return code;
}
