#include "psifrac/psifrac.h"

#include <map>
#include <new>
#include <string>

#include "psifrac/commands.hpp"
#include "psifrac/error.hpp"
#include "psifrac/expr.hpp"
#include "psifrac/problem_file.hpp"
#include "psifrac/special_functions.hpp"

struct psifrac_problem {
  psifrac::LoadedProblem value;
};

struct psifrac_report {
  psifrac::Report value;
};

struct psifrac_expr {
  psifrac::expr::Expr value;
  std::string text;
};

namespace {

thread_local std::string last_error;

psifrac_status status_of(psifrac::ErrorCode code) {
  using psifrac::ErrorCode;
  switch (code) {
    case ErrorCode::validation:
      return PSIFRAC_E_VALIDATION;
    case ErrorCode::syntax:
      return PSIFRAC_E_SYNTAX;
    case ErrorCode::unknown_identifier:
      return PSIFRAC_E_UNKNOWN_IDENTIFIER;
    case ErrorCode::unbound_variable:
      return PSIFRAC_E_UNBOUND_VARIABLE;
    case ErrorCode::non_differentiable:
      return PSIFRAC_E_NON_DIFFERENTIABLE;
    case ErrorCode::arity:
      return PSIFRAC_E_ARITY;
    case ErrorCode::ordering:
      return PSIFRAC_E_ORDERING;
    case ErrorCode::missing_derivative:
      return PSIFRAC_E_MISSING_DERIVATIVE;
    case ErrorCode::grid:
      return PSIFRAC_E_GRID;
    case ErrorCode::io:
      return PSIFRAC_E_IO;
    case ErrorCode::domain:
      return PSIFRAC_E_DOMAIN;
    case ErrorCode::pole:
      return PSIFRAC_E_POLE;
    case ErrorCode::convergence:
      return PSIFRAC_E_CONVERGENCE;
    case ErrorCode::singular:
      return PSIFRAC_E_SINGULAR;
    case ErrorCode::no_sign_change:
      return PSIFRAC_E_NO_SIGN_CHANGE;
    case ErrorCode::max_iter:
      return PSIFRAC_E_MAX_ITER;
  }
  return PSIFRAC_E_INTERNAL;
}

template <class F>
psifrac_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return PSIFRAC_OK;
  } catch (const psifrac::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return PSIFRAC_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return PSIFRAC_E_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return PSIFRAC_E_INTERNAL;
  }
}

psifrac_status null_argument(const char* what) {
  last_error = std::string("null argument: ") + what;
  return PSIFRAC_E_NULL_ARGUMENT;
}

}  // namespace

extern "C" {

const char* psifrac_version(void) { return "0.1.0"; }

const char* psifrac_status_name(psifrac_status status) {
  switch (status) {
    case PSIFRAC_OK:
      return "ok";
    case PSIFRAC_E_NULL_ARGUMENT:
      return "null_argument";
    case PSIFRAC_E_INTERNAL:
      return "internal";
    default:
      break;
  }
  for (int c = 0; c <= static_cast<int>(psifrac::ErrorCode::max_iter); ++c) {
    const auto code = static_cast<psifrac::ErrorCode>(c);
    if (status_of(code) == status) return psifrac::to_string(code);
  }
  return "unknown";
}

int psifrac_status_is_validation(psifrac_status status) {
  return status != PSIFRAC_OK && status < PSIFRAC_E_DOMAIN ? 1 : 0;
}

const char* psifrac_last_error(void) { return last_error.c_str(); }

psifrac_status psifrac_gamma(double x, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = psifrac::gamma(x); });
}

psifrac_status psifrac_digamma(double x, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = psifrac::digamma(x); });
}

psifrac_status psifrac_mittag_leffler(double alpha, double z, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = psifrac::mittag_leffler({alpha, z}); });
}

psifrac_status psifrac_problem_load(const char* text, psifrac_problem** out) {
  if (!text) return null_argument("text");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new psifrac_problem{psifrac::load_problem(text)}; });
}

psifrac_status psifrac_problem_load_file(const char* path, psifrac_problem** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] { *out = new psifrac_problem{psifrac::load_problem_file(path)}; });
}

const char* psifrac_problem_hash(const psifrac_problem* problem) {
  return problem ? problem->value.hash.c_str() : "";
}

void psifrac_problem_free(psifrac_problem* problem) { delete problem; }

size_t psifrac_command_count(void) { return psifrac::command_names().size(); }

const char* psifrac_command_name(size_t index) {
  const auto& names = psifrac::command_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

psifrac_status psifrac_run(const char* command, const psifrac_problem* problem, const char* options_json,
                           psifrac_report** out) {
  if (!command) return null_argument("command");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto r = psifrac::run_command(command, problem ? &problem->value : nullptr, options_json ? options_json : "");
    *out = new psifrac_report{std::move(r)};
  });
}

const char* psifrac_report_json(const psifrac_report* report) { return report ? report->value.json.c_str() : ""; }

const char* psifrac_report_csv(const psifrac_report* report) { return report ? report->value.csv.c_str() : ""; }

void psifrac_report_free(psifrac_report* report) { delete report; }

psifrac_status psifrac_expr_parse(const char* source, psifrac_expr** out) {
  if (!source) return null_argument("source");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto e = psifrac::expr::parse(source);
    *out = new psifrac_expr{e, psifrac::expr::print(e)};
  });
}

const char* psifrac_expr_text(const psifrac_expr* e) { return e ? e->text.c_str() : ""; }

psifrac_status psifrac_expr_differentiate(const psifrac_expr* e, const char* wrt, psifrac_expr** out) {
  if (!e) return null_argument("e");
  if (!wrt) return null_argument("wrt");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto d = psifrac::expr::differentiate(e->value, wrt);
    *out = new psifrac_expr{d, psifrac::expr::print(d)};
  });
}

psifrac_status psifrac_expr_evaluate(const psifrac_expr* e, const char* const* names, const double* values,
                                     size_t count, double* out) {
  if (!e) return null_argument("e");
  if (!out) return null_argument("out");
  if (count > 0 && (!names || !values)) return null_argument("names/values");
  return guarded([&] {
    std::map<std::string, double, std::less<>> env;
    for (size_t i = 0; i < count; ++i) {
      if (!names[i]) throw psifrac::Error(psifrac::ErrorCode::validation, "null variable name");
      env[names[i]] = values[i];
    }
    *out = psifrac::expr::evaluate(e->value, env);
  });
}

void psifrac_expr_free(psifrac_expr* e) { delete e; }

}  // extern "C"
