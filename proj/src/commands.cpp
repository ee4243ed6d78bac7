#include "psifrac/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include <json.hpp>

#include "psifrac/error.hpp"
#include "psifrac/special_functions.hpp"

namespace psifrac {

namespace {

using json = nlohmann::json;

// --- built-in problems ---------------------------------------------------

const char* const kExample1 = R"psf([problem]
kind = "fundamental"
alpha = 0.5
interval = 0 2
x_a = 0

[psi]
expr = "t"

[lagrangian]
L = "(d - s^(1 - alpha)/gammafn(2 - alpha))^2 + t^2 - 1"

[candidate]
x = "t"
T = 1

[grid]
N = 2048
scheme = "uniform_in_psi"
)psf";

const char* const kExample2Psi1 = R"psf([problem]
kind = "isoperimetric"
alpha = 0.5
interval = 0 2
x_a = 0
lambda_hint = -2

[psi]
expr = "t"

[lagrangian]
L = "d^2 + (s^(1 - alpha)/gammafn(2 - alpha))^2 + t^2 - 1"

[constraint]
M = "d*s^(1 - alpha)/gammafn(2 - alpha)"
Phi = "t^(3 - 2*alpha)/((3 - 2*alpha)*gammafn(2 - alpha)^2)"
dPhi = "(t^(1 - alpha)/gammafn(2 - alpha))^2"

[candidate]
x = "t"

[grid]
N = 2048
)psf";

const char* const kExample2Psi2 = R"psf([problem]
kind = "isoperimetric"
alpha = 0.5
interval = 0 3
x_a = 0
lambda_hint = -2

[psi]
expr = "sqrt(t + 1)"

[lagrangian]
L = "d^2 + (s^(1 - alpha)/gammafn(2 - alpha))^2 + t^2 - 1"

[constraint]
M = "d*s^(1 - alpha)/gammafn(2 - alpha)"
dPhi = "((sqrt(t + 1) - 1)^(1 - alpha)/gammafn(2 - alpha))^2"

[candidate]
x = "sqrt(t + 1) - 1"

[grid]
N = 2048
)psf";

const char* const kExample3Psi1 = R"psf([problem]
kind = "optimal-order"
alpha = 0.5
interval = 0 10
x_a = 0

[psi]
expr = "t"

[lagrangian]
L = "s^alpha/(2*gammafn(alpha + 2))*d^2 - s^(alpha + 1)*d + 20*gammafn(alpha + 2)"

[candidate]
x = "t^(alpha + 1)"

[grid]
N = 1024

[solver]
alpha_bracket = 0.02 0.98
)psf";

const char* const kExample3Psi2 = R"psf([problem]
kind = "optimal-order"
alpha = 0.5
interval = 0 60
x_a = 0

[psi]
expr = "sqrt(t + 1)"

[lagrangian]
L = "s^alpha/(2*gammafn(alpha + 2))*d^2 - s^(alpha + 1)*d + 20*gammafn(alpha + 2)"

[candidate]
x = "(sqrt(t + 1) - 1)^(alpha + 1)"

[grid]
N = 1024

[solver]
alpha_bracket = 0.02 0.98
)psf";

const char* const kCounterexample = R"psf([problem]
kind = "fundamental"
alpha = 0.5
interval = 0 2
x_a = 0

[psi]
expr = "t"

[lagrangian]
L = "1 - t"

[candidate]
x = "0"
T = 1

[grid]
N = 256
)psf";

// --- options -------------------------------------------------------------

class Options {
 public:
  explicit Options(std::string_view text) {
    if (text.empty()) {
      j_ = json::object();
      return;
    }
    try {
      j_ = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::validation, std::string("options are not valid JSON: ") + e.what());
    }
    if (!j_.is_object()) throw Error(ErrorCode::validation, "options must be a JSON object");
  }

  std::optional<double> number(const char* key) const {
    if (!j_.contains(key) || j_[key].is_null()) return std::nullopt;
    if (!j_[key].is_number()) throw Error(ErrorCode::validation, std::string("option ") + key + " must be a number");
    return j_[key].get<double>();
  }

  std::optional<std::string> text(const char* key) const {
    if (!j_.contains(key) || j_[key].is_null()) return std::nullopt;
    if (!j_[key].is_string()) throw Error(ErrorCode::validation, std::string("option ") + key + " must be a string");
    return j_[key].get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const char* key) const {
    if (!j_.contains(key) || j_[key].is_null()) return std::nullopt;
    if (!j_[key].is_array()) throw Error(ErrorCode::validation, std::string("option ") + key + " must be an array");
    std::vector<double> out;
    for (const auto& v : j_[key]) {
      if (!v.is_number()) throw Error(ErrorCode::validation, std::string("option ") + key + " must hold numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

 private:
  json j_;
};

// --- report helpers ------------------------------------------------------

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json grid_meta_json(const GridMeta& m) {
  return {{"N", m.N}, {"scheme", to_string(m.scheme)}, {"h_fd", m.h_fd}};
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string csv() const {
    if (columns.empty()) return {};
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += '\n';
    char buf[40];
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", r[i]);
        if (i) out += ',';
        out += buf;
      }
      out += '\n';
    }
    return out;
  }
};

Report finish(const std::string& hash, const GridMeta& meta, std::array<double, 2> window, json results,
              const Table& table = {}) {
  json j;
  j["version"] = kReportVersion;
  j["problem_hash"] = hash;
  j["grid_meta"] = grid_meta_json(meta);
  j["window"] = {num(window[0]), num(window[1])};
  j["results"] = std::move(results);
  return {j.dump(2), table.csv()};
}

const LoadedProblem& need_problem(const LoadedProblem* p, std::string_view cmd) {
  if (!p) throw Error(ErrorCode::validation, std::string(cmd) + " needs --problem");
  return *p;
}

const Path& need_candidate(const LoadedProblem& p, std::string_view cmd) {
  if (!p.candidate) throw Error(ErrorCode::validation, std::string(cmd) + " needs a [candidate] x");
  return *p.candidate;
}

void need_kind(const LoadedProblem& p, std::initializer_list<ProblemKind> kinds, std::string_view cmd) {
  for (auto k : kinds) {
    if (p.spec.kind == k) return;
  }
  throw Error(ErrorCode::validation,
              std::string(cmd) + " does not apply to kind " + to_string(p.spec.kind));
}

double terminal(const LoadedProblem& p, const Options& o) {
  if (const auto T = o.number("T")) return *T;
  if (p.T) return *p.T;
  return p.spec.b();
}

Table node_table(const ResidualReport& r) {
  Table t{{"t", "psi_t", "el_residual", "window_flag"}, {}};
  for (const auto& n : r.el_nodes) t.rows.push_back({n.t, n.psi_t, n.residual, n.in_window ? 1.0 : 0.0});
  return t;
}

json residual_json(const ResidualReport& r) {
  json j;
  j["el_max"] = num(r.el_max);
  j["trans_integral"] = num(r.trans_integral);
  j["trans_lagrangian"] = num(r.trans_lagrangian);
  j["legendre_min"] = r.legendre_min ? num(*r.legendre_min) : json(nullptr);
  j["nodes"] = r.el_nodes.size();
  json extras = json::object();
  for (const auto& [k, v] : r.extras) extras[k] = num(v);
  j["extras"] = extras;
  return j;
}

Report residual_report(const LoadedProblem& p, const ResidualReport& r, json extra = json::object()) {
  json res = residual_json(r);
  for (auto& [k, v] : extra.items()) res[k] = v;
  GridMeta meta = p.meta;
  meta.h_fd = r.grid_meta.h_fd != 0.0 ? r.grid_meta.h_fd : meta.h_fd;
  return finish(p.hash, meta, r.window, res, node_table(r));
}

ElMode mode_of(const Options& o) {
  const auto m = o.text("mode").value_or("rl");
  if (m == "rl" || m == "riemann-liouville") return ElMode::riemann_liouville;
  if (m == "caputo") return ElMode::caputo;
  throw Error(ErrorCode::validation, "mode must be rl or caputo");
}

StationarityForm form_of(const Options& o) {
  const auto f = o.text("form").value_or("derived");
  if (f == "derived") return StationarityForm::derived;
  if (f == "printed") return StationarityForm::printed;
  throw Error(ErrorCode::validation, "form must be derived or printed");
}

LoadedProblem builtin(std::string_view name) { return load_problem(builtin_problem(name)); }

std::string psi_choice(const Options& o) {
  const auto psi = o.text("psi").value_or("psi1");
  if (psi != "psi1" && psi != "psi2") throw Error(ErrorCode::validation, "psi must be psi1 or psi2");
  return psi;
}

// --- commands ------------------------------------------------------------

Report op_eval(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "op-eval");
  const Path& x = need_candidate(p, "op-eval");
  const auto& psi = p.spec.psi;
  const double T = terminal(p, o);
  const double alpha = o.number("alpha").value_or(p.spec.orders.front().alpha);
  if (!(alpha > 0.0)) throw Error(ErrorCode::validation, "alpha must be positive");
  const auto op = o.text("op").value_or("caputo_left");
  const QuadGrid grid = p.grid.rebuilt(psi, p.spec.a(), T);
  std::vector<double> ts;
  if (const auto list = o.numbers("t")) {
    ts = *list;
  } else {
    ts.assign(grid.nodes.begin() + 1, grid.nodes.end() - 1);
  }
  using OpFn = std::function<double(double)>;
  const Order ord = Order::of(alpha);
  std::map<std::string, OpFn> ops{
      {"frac_integral_left", [&](double t) { return frac_integral_left(x, ord, psi, t, grid); }},
      {"frac_integral_right", [&](double t) { return frac_integral_right(x, ord, psi, t, grid); }},
      {"caputo_left", [&](double t) { return caputo_left(x, ord, psi, t, grid); }},
      {"caputo_right", [&](double t) { return caputo_right(x, ord, psi, t, grid); }},
      {"rl_right", [&](double t) { return rl_right(x, ord, psi, T, t, grid); }},
  };
  const auto it = ops.find(op);
  if (it == ops.end()) {
    throw Error(ErrorCode::validation,
                "op must be one of frac_integral_left, frac_integral_right, caputo_left, caputo_right, rl_right");
  }
  Table table{{"t", "psi_t", "value"}, {}};
  json values = json::array();
  for (double t : ts) {
    if (!(t >= p.spec.a() && t <= T)) throw Error(ErrorCode::domain, "t=" + std::to_string(t) + " outside [a, T]");
    const double v = it->second(t);
    table.rows.push_back({t, psi(t), v});
    values.push_back({{"t", t}, {"value", num(v)}});
  }
  json res{{"op", op}, {"alpha", alpha}, {"T", T}, {"count", ts.size()}};
  if (ts.size() <= 64) res["values"] = values;
  return finish(p.hash, p.meta, {p.spec.a(), T}, res, table);
}

Report el_check(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "el-check");
  const Path& x = need_candidate(p, "el-check");
  need_kind(p, {ProblemKind::fundamental, ProblemKind::extended, ProblemKind::optimal_order}, "el-check");
  const double T = terminal(p, o);
  const auto r = p.spec.kind == ProblemKind::extended ? extended_residuals(p.spec, x, T, p.grid)
                                                      : el_residual(p.spec, x, T, p.grid, mode_of(o));
  return residual_report(p, r, {{"T", T}, {"kind", to_string(p.spec.kind)}});
}

Report iso_check(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "iso-check");
  const Path& x = need_candidate(p, "iso-check");
  need_kind(p, {ProblemKind::isoperimetric}, "iso-check");
  std::optional<double> lambda = o.number("lambda");
  std::optional<double> T = o.number("T");
  if (!T) T = p.T;
  json solved = nullptr;
  if (!T) {
    ProblemSpec spec = p.spec;
    if (lambda) spec.lambda = lambda;
    const auto sol = solve_isoperimetric(spec, x, p.time_root, p.grid);
    T = sol.T;
    lambda = sol.lambda;
    solved = {{"T_star", sol.T}, {"lambda", sol.lambda}, {"lambda_from_hint", sol.lambda_from_hint}};
  }
  if (!lambda) lambda = p.spec.lambda;
  if (!lambda) throw Error(ErrorCode::validation, "iso-check needs --lambda or lambda_hint");
  const auto r = isoperimetric_residuals(p.spec, x, *T, *lambda, p.grid);
  return residual_report(p, r, {{"T", *T}, {"lambda", *lambda}, {"solved", solved}});
}

Report legendre(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "legendre");
  const Path& x = need_candidate(p, "legendre");
  const double T = terminal(p, o);
  const auto r = legendre_check(p.spec, x, T, p.grid);
  return finish(p.hash, p.meta, {p.spec.a(), T},
                {{"legendre_min", num(r.min)}, {"pass", r.pass}, {"tolerance", kLegendreTol}, {"T", T}});
}

Report delay_check(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "delay-check");
  need_kind(p, {ProblemKind::delay}, "delay-check");
  const double T = terminal(p, o);
  return residual_report(p, delay_residuals(p.spec, need_candidate(p, "delay-check"), T, p.grid), {{"T", T}});
}

Report highorder_check(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "highorder-check");
  need_kind(p, {ProblemKind::high_order}, "highorder-check");
  const double T = terminal(p, o);
  return residual_report(p, high_order_residuals(p.spec, need_candidate(p, "highorder-check"), T, p.grid),
                         {{"T", T}});
}

json order_json(const OptimalOrderSolution& s) {
  return {{"alpha_star", s.alpha},
          {"T_star", s.T},
          {"integral", s.integral},
          {"form", to_string(s.form)},
          {"psi_T_star_minus_psi_a", order_terminal_gap(s.alpha)},
          {"T_as_printed", s.T_as_printed},
          {"printed_reading_matches", s.printed_matches},
          {"alpha_other_form", s.alpha_other_form ? json(*s.alpha_other_form) : json(nullptr)}};
}

Report order_opt(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "order-opt");
  need_kind(p, {ProblemKind::optimal_order}, "order-opt");
  const auto s = solve_optimal_order(p.spec, p.order_root, form_of(o));
  return finish(p.hash, p.meta, {p.spec.a(), s.T}, order_json(s));
}

Report terminal_time(const LoadedProblem* lp, const Options&) {
  const auto& p = need_problem(lp, "terminal-time");
  const Path& x = need_candidate(p, "terminal-time");
  const double T = find_terminal_time(p.spec, x, p.time_root, p.grid);
  return finish(p.hash, p.meta, {p.spec.a(), T},
                {{"T_star", T}, {"L_at_T_star", num(lagrangian_at(p.spec, x, T, p.grid))}});
}

Report direct_min(const LoadedProblem* lp, const Options& o) {
  const auto& p = need_problem(lp, "direct-min");
  MinimizeConfig cfg = p.minimize;
  if (const auto s = o.number("seed")) cfg.seed = static_cast<std::uint64_t>(*s);
  if (const auto m = o.number("max_evals")) cfg.max_evals = static_cast<int>(*m);
  const auto r = direct_minimize(p.spec, cfg, p.grid);
  return finish(p.hash, p.meta, {p.spec.a(), r.T},
                {{"J_best", num(r.J)},
                 {"T_best", r.T},
                 {"x_a", r.x_a},
                 {"coefficients", r.coefficients},
                 {"evaluations", r.evaluations},
                 {"exhausted", r.exhausted},
                 {"seed", cfg.seed},
                 {"basis_size", cfg.basis_size}});
}

Report sweep_alpha(const LoadedProblem* lp, const Options& o) {
  std::optional<LoadedProblem> own;
  if (!lp) {
    own = builtin("example3-" + psi_choice(o));
    lp = &*own;
  }
  const auto& p = *lp;
  need_kind(p, {ProblemKind::optimal_order}, "sweep-alpha");
  const auto br = p.order_root.bracket.value_or(kDefaultOrderBracket);
  const int samples = static_cast<int>(o.number("samples").value_or(97));
  if (samples < 3) throw Error(ErrorCode::validation, "samples must be >= 3");
  const double step = (br[1] - br[0]) / (samples - 1);
  Table table{{"alpha", "T_star", "J"}, {}};
  std::size_t best = 0;
  for (int k = 0; k < samples; ++k) {
    const double al = br[0] + step * k;
    const double T = order_terminal_time(p.spec.psi, al);
    table.rows.push_back({al, T, order_objective(p.spec.psi, al, T)});
    if (table.rows.back()[2] < table.rows[best][2]) best = table.rows.size() - 1;
  }
  json res{{"samples", samples},
           {"step", step},
           {"alpha_min_sample", table.rows[best][0]},
           {"J_min_sample", table.rows[best][2]}};
  try {
    const auto s = solve_optimal_order(p.spec, p.order_root, form_of(o));
    res["alpha_star"] = s.alpha;
    res["within_one_step"] = std::fabs(s.alpha - table.rows[best][0]) <= step;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::no_sign_change) throw;
    res["alpha_star"] = nullptr;
    res["within_one_step"] = nullptr;
  }
  return finish(p.hash, p.meta, {br[0], br[1]}, res, table);
}

Report reproduce(const LoadedProblem*, const Options& o) {
  const auto target = o.text("target").value_or("");
  if (target == "example1") {
    const auto p = builtin("example1");
    const Path& x = *p.candidate;
    const auto r = el_residual(p.spec, x, 1.0, p.grid);
    const double J = objective(p.spec, x, 1.0, p.grid);
    const double T = find_terminal_time(p.spec, x, p.time_root, p.grid);
    const auto leg = legendre_check(p.spec, x, 1.0, p.grid);
    json res = residual_json(r);
    res["target"] = target;
    res["J_star"] = J;
    res["J_exact"] = -2.0 / 3.0;
    res["T_star"] = T;
    res["legendre_min"] = leg.min;
    res["legendre_pass"] = leg.pass;
    return finish(p.hash, p.meta, r.window, res, node_table(r));
  }
  if (target == "example2") {
    const auto psi = psi_choice(o);
    const auto p = builtin("example2-" + psi);
    const Path& x = *p.candidate;
    const auto sol = solve_isoperimetric(p.spec, x, p.time_root, p.grid);
    const auto r = isoperimetric_residuals(p.spec, x, sol.T, sol.lambda, p.grid);
    const double alpha = p.spec.orders.front().alpha;
    const double g = std::pow(p.spec.psi(sol.T) - p.spec.psi(p.spec.a()), 1.0 - alpha) / psifrac::gamma(2.0 - alpha);
    json res = residual_json(r);
    res["target"] = target;
    res["psi"] = psi;
    res["T_star"] = sol.T;
    res["lambda"] = sol.lambda;
    res["lambda_from_hint"] = sol.lambda_from_hint;
    res["terminal_equation_residual"] = sol.T * sol.T - 1.0 + 2.0 * g * g;
    res["constraint_defect"] = sol.constraint_defect;
    return finish(p.hash, p.meta, r.window, res, node_table(r));
  }
  if (target == "example3") {
    const auto psi = psi_choice(o);
    const auto p = builtin("example3-" + psi);
    const auto s = solve_optimal_order(p.spec, p.order_root, form_of(o));
    json res = order_json(s);
    res["target"] = target;
    res["psi"] = psi;
    return finish(p.hash, p.meta, {p.spec.a(), s.T}, res);
  }
  if (target == "counterexample") {
    const auto p = builtin("counterexample");
    const Path& x = *p.candidate;
    std::vector<Perturbation> perts;
    const std::vector<double> steps{0.1, 0.01, -0.1, -0.01};
    for (double dT : steps) perts.push_back({Path([](double) { return 0.0; }), dT});
    const auto r = sufficiency_epsilon_check(p.spec, x, 1.0, perts, p.grid);
    json gaps = json::array();
    for (std::size_t i = 0; i < steps.size(); ++i) {
      gaps.push_back({{"dT", steps[i]}, {"gap", r.gaps[i]}, {"expected", -0.5 * steps[i] * steps[i]}});
    }
    const double T = find_terminal_time(p.spec, x, p.time_root, p.grid);
    return finish(p.hash, p.meta, {p.spec.a(), 1.0},
                  {{"target", target}, {"T_star", T}, {"min_gap", r.min_gap}, {"gaps", gaps}});
  }
  throw Error(ErrorCode::validation, "reproduce target must be example1, example2, example3 or counterexample");
}

using Handler = Report (*)(const LoadedProblem*, const Options&);

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> h{
      {"op-eval", op_eval},
      {"el-check", el_check},
      {"iso-check", iso_check},
      {"legendre", legendre},
      {"delay-check", delay_check},
      {"highorder-check", highorder_check},
      {"order-opt", order_opt},
      {"terminal-time", terminal_time},
      {"direct-min", direct_min},
      {"reproduce", reproduce},
      {"sweep-alpha", sweep_alpha},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, v] : handlers()) out.push_back(k);
    return out;
  }();
  return names;
}

std::string builtin_problem(std::string_view name) {
  static const std::map<std::string, const char*, std::less<>> texts{
      {"example1", kExample1},           {"example2-psi1", kExample2Psi1}, {"example2-psi2", kExample2Psi2},
      {"example3-psi1", kExample3Psi1}, {"example3-psi2", kExample3Psi2}, {"counterexample", kCounterexample},
  };
  const auto it = texts.find(name);
  if (it == texts.end()) throw Error(ErrorCode::validation, "no built-in problem '" + std::string(name) + "'");
  return it->second;
}

Report run_command(std::string_view command, const LoadedProblem* problem, std::string_view options_json) {
  const auto it = handlers().find(command);
  if (it == handlers().end()) throw Error(ErrorCode::validation, "unknown command '" + std::string(command) + "'");
  return it->second(problem, Options(options_json));
}

}  // namespace psifrac
