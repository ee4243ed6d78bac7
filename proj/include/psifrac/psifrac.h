#ifndef PSIFRAC_H
#define PSIFRAC_H

#include <stddef.h>

#if defined(PSIFRAC_BUILDING)
#define PSIFRAC_API __attribute__((visibility("default")))
#else
#define PSIFRAC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values below PSIFRAC_E_DOMAIN describe bad input. */
typedef enum psifrac_status {
  PSIFRAC_OK = 0,
  PSIFRAC_E_VALIDATION = 1,
  PSIFRAC_E_SYNTAX = 2,
  PSIFRAC_E_UNKNOWN_IDENTIFIER = 3,
  PSIFRAC_E_UNBOUND_VARIABLE = 4,
  PSIFRAC_E_NON_DIFFERENTIABLE = 5,
  PSIFRAC_E_ARITY = 6,
  PSIFRAC_E_ORDERING = 7,
  PSIFRAC_E_MISSING_DERIVATIVE = 8,
  PSIFRAC_E_GRID = 9,
  PSIFRAC_E_IO = 10,
  PSIFRAC_E_NULL_ARGUMENT = 11,
  PSIFRAC_E_DOMAIN = 20,
  PSIFRAC_E_POLE = 21,
  PSIFRAC_E_CONVERGENCE = 22,
  PSIFRAC_E_SINGULAR = 23,
  PSIFRAC_E_NO_SIGN_CHANGE = 24,
  PSIFRAC_E_MAX_ITER = 25,
  PSIFRAC_E_INTERNAL = 30
} psifrac_status;

typedef struct psifrac_problem psifrac_problem;
typedef struct psifrac_report psifrac_report;
typedef struct psifrac_expr psifrac_expr;

PSIFRAC_API const char* psifrac_version(void);
PSIFRAC_API const char* psifrac_status_name(psifrac_status status);
PSIFRAC_API int psifrac_status_is_validation(psifrac_status status);
/* Message of the last failed call on this thread ("" if none). */
PSIFRAC_API const char* psifrac_last_error(void);

/* Special functions. */
PSIFRAC_API psifrac_status psifrac_gamma(double x, double* out);
PSIFRAC_API psifrac_status psifrac_digamma(double x, double* out);
PSIFRAC_API psifrac_status psifrac_mittag_leffler(double alpha, double z, double* out);

/* Problems and reports. */
PSIFRAC_API psifrac_status psifrac_problem_load(const char* text, psifrac_problem** out);
PSIFRAC_API psifrac_status psifrac_problem_load_file(const char* path, psifrac_problem** out);
PSIFRAC_API const char* psifrac_problem_hash(const psifrac_problem* problem);
PSIFRAC_API void psifrac_problem_free(psifrac_problem* problem);

/* Number of subcommands and the name of the i-th one. */
PSIFRAC_API size_t psifrac_command_count(void);
PSIFRAC_API const char* psifrac_command_name(size_t index);

/* Runs a subcommand. problem may be NULL for reproduce and sweep-alpha;
   options_json may be NULL. */
PSIFRAC_API psifrac_status psifrac_run(const char* command, const psifrac_problem* problem, const char* options_json,
                                       psifrac_report** out);
PSIFRAC_API const char* psifrac_report_json(const psifrac_report* report);
/* CSV table of the report, "" when the command has none. */
PSIFRAC_API const char* psifrac_report_csv(const psifrac_report* report);
PSIFRAC_API void psifrac_report_free(psifrac_report* report);

/* Expressions. */
PSIFRAC_API psifrac_status psifrac_expr_parse(const char* source, psifrac_expr** out);
PSIFRAC_API const char* psifrac_expr_text(const psifrac_expr* e);
PSIFRAC_API psifrac_status psifrac_expr_differentiate(const psifrac_expr* e, const char* wrt, psifrac_expr** out);
PSIFRAC_API psifrac_status psifrac_expr_evaluate(const psifrac_expr* e, const char* const* names, const double* values,
                                                 size_t count, double* out);
PSIFRAC_API void psifrac_expr_free(psifrac_expr* e);

#ifdef __cplusplus
}
#endif

#endif
