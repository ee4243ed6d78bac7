#include "psifrac/problem_file.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "psifrac/error.hpp"

namespace psifrac {

namespace {

using expr::Expr;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"problem", {"kind", "alpha", "interval", "x_a", "A", "x_A_free", "tau", "lambda_hint", "history"}},
      {"psi", {"expr", "derivative"}},
      {"lagrangian", {"L", "dL_dx", "dL_dd", "dL_dxtau"}},
      {"constraint", {"M", "Phi", "dPhi"}},
      {"candidate", {"x", "dx", "T"}},
      {"grid", {"N", "scheme"}},
      {"solver",
       {"T_bracket", "alpha_bracket", "tol_x", "tol_f", "max_iter", "seed", "basis_size", "simplex_scale",
        "max_evals"}},
  };
  return s;
}

bool is_indexed_partial(const std::string& key) {
  // dL_dd1, dL_dd2, ... for high-order problems
  if (key.rfind("dL_dd", 0) != 0 || key.size() == 5) return false;
  return std::all_of(key.begin() + 5, key.end(), [](char c) { return c >= '0' && c <= '9'; }) && key[5] != '0';
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(int line, const std::string& msg) {
  throw Error(ErrorCode::validation, "line " + std::to_string(line) + ": " + msg);
}

// --- typed accessors -----------------------------------------------------

class Reader {
 public:
  explicit Reader(const ProblemFile& f) : f_(f) {}

  const ProblemFile::Entry* get(const std::string& sec, const std::string& key) const { return f_.find(sec, key); }
  bool has(const std::string& sec, const std::string& key) const { return get(sec, key) != nullptr; }

  const ProblemFile::Entry& need(const std::string& sec, const std::string& key) const {
    const auto* e = get(sec, key);
    if (!e) throw Error(ErrorCode::validation, "missing [" + sec + "] " + key);
    return *e;
  }

  Expr expression(const ProblemFile::Entry& e, const std::string& what) const {
    try {
      return expr::parse(e.value);
    } catch (const Error& err) {
      throw Error(err.code(), "line " + std::to_string(e.line) + " (" + what + "): " + err.what());
    }
  }

  // numbers may be written as constant expressions such as pi/4
  double number(const ProblemFile::Entry& e, const std::string& what) const {
    const Expr x = expression(e, what);
    try {
      return expr::evaluate(x, {});
    } catch (const Error& err) {
      bad(e.line, what + " must be a constant: " + err.what());
    }
  }

  std::optional<double> number(const std::string& sec, const std::string& key) const {
    const auto* e = get(sec, key);
    if (!e) return std::nullopt;
    return number(*e, key);
  }

  std::vector<double> numbers(const ProblemFile::Entry& e, const std::string& what) const {
    std::string text = e.value;
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      try {
        out.push_back(expr::evaluate(expr::parse(tok), {}));
      } catch (const Error& err) {
        bad(e.line, what + ": '" + tok + "' is not a number");
      }
    }
    return out;
  }

  std::array<double, 2> pair(const ProblemFile::Entry& e, const std::string& what) const {
    const auto v = numbers(e, what);
    if (v.size() != 2) bad(e.line, what + " needs two numbers 'lo hi'");
    if (!(v[0] < v[1])) bad(e.line, what + " needs lo < hi");
    return {v[0], v[1]};
  }

  int integer(const std::string& sec, const std::string& key, int fallback) const {
    const auto* e = get(sec, key);
    if (!e) return fallback;
    const double v = number(*e, key);
    if (v != std::floor(v) || std::fabs(v) > 2e9) bad(e->line, key + " must be an integer");
    return static_cast<int>(v);
  }

 private:
  const ProblemFile& f_;
};

// --- expression-backed callables ----------------------------------------

RealFn time_fn(const Expr& e) {
  auto prog = std::make_shared<expr::Program>(e, std::vector<std::string>{"t"});
  return [prog](double t) {
    const std::array<double, 1> v{t};
    return (*prog)(v);
  };
}

// Lagrangian variable layout: t, s, alpha, x, d, xtau, d1, d2, ...
constexpr std::size_t kFixedSlots = 6;
constexpr std::size_t kMaxOrders = 10;

std::vector<std::string> lag_layout(std::size_t orders) {
  std::vector<std::string> out{"t", "s", "alpha", "x", "d", "xtau"};
  for (std::size_t k = 1; k <= orders; ++k) out.push_back("d" + std::to_string(k));
  return out;
}

LagFn lag_fn(const Expr& e, std::size_t orders) {
  auto prog = std::make_shared<expr::Program>(e, lag_layout(orders));
  return [prog, orders](const LagPoint& p) {
    std::array<double, kFixedSlots + kMaxOrders> v{};
    v[0] = p.t;
    v[1] = p.s;
    v[2] = p.alpha;
    v[3] = p.x.empty() ? 0.0 : p.x[0];
    v[4] = p.d.empty() ? 0.0 : p.d[0];
    v[5] = p.xtau;
    for (std::size_t k = 0; k < orders && k < p.d.size(); ++k) v[kFixedSlots + k] = p.d[k];
    return (*prog)(std::span<const double>(v.data(), kFixedSlots + orders));
  };
}

Expr partial_of(const Reader& r, const Expr& L, const std::string& key, const std::string& wrt,
                const std::set<std::string>& allowed) {
  if (const auto* e = r.get("lagrangian", key)) {
    Expr x = r.expression(*e, key);
    expr::require_variables(x, allowed, key);
    return x;
  }
  return expr::differentiate(L, wrt);
}

std::optional<Expr> second_partial(const Expr& first, const std::string& wrt) {
  try {
    return expr::differentiate(first, wrt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::non_differentiable) throw;
    return std::nullopt;
  }
}

GridScheme scheme_from(const ProblemFile::Entry& e) {
  if (e.value == "uniform_in_psi" || e.value == "uniform-in-psi") return GridScheme::uniform_in_psi;
  if (e.value == "uniform_in_t" || e.value == "uniform-in-t") return GridScheme::uniform_in_t;
  bad(e.line, "scheme must be uniform_in_psi or uniform_in_t");
}

}  // namespace

const ProblemFile::Entry* ProblemFile::find(const std::string& section, const std::string& key) const {
  const auto s = sections.find(section);
  if (s == sections.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ProblemFile parse_problem_file(std::string_view text) {
  ProblemFile f;
  f.source = std::string(text);
  std::string section;
  std::istringstream in(f.source);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    // strip a comment outside quotes
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (raw[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    const std::string body = trim(std::string_view(raw).substr(0, cut));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') bad(line, "unterminated section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      if (!schema().count(section)) bad(line, "unknown section [" + section + "]");
      if (f.sections.count(section)) bad(line, "duplicate section [" + section + "]");
      f.sections[section];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) bad(line, "expected 'key = value'");
    if (section.empty()) bad(line, "key outside of a section");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) bad(line, "empty key");
    const bool known = schema().at(section).count(key) || (section == "lagrangian" && is_indexed_partial(key));
    if (!known) bad(line, "unknown key '" + key + "' in [" + section + "]");
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') bad(line, "unterminated string");
      value = value.substr(1, value.size() - 2);
      if (value.find('"') != std::string::npos) bad(line, "stray quote in value");
    }
    if (value.empty()) bad(line, "empty value for '" + key + "'");
    auto& sec = f.sections[section];
    if (sec.count(key)) bad(line, "duplicate key '" + key + "'");
    sec[key] = {value, line};
  }
  return f;
}

LoadedProblem load_problem(std::string_view text) {
  const ProblemFile f = parse_problem_file(text);
  const Reader r(f);
  LoadedProblem out;
  out.hash = fnv1a_hex(text);
  ProblemSpec& p = out.spec;

  // [problem]
  const auto& kind_e = r.need("problem", "kind");
  try {
    p.kind = problem_kind_from(kind_e.value);
  } catch (const Error& e) {
    bad(kind_e.line, e.what());
  }
  const auto& alpha_e = r.need("problem", "alpha");
  const auto alphas = r.numbers(alpha_e, "alpha");
  if (alphas.empty()) bad(alpha_e.line, "alpha is empty");
  if (alphas.size() > 1 && p.kind != ProblemKind::high_order) bad(alpha_e.line, "an alpha list needs kind high-order");
  if (alphas.size() > kMaxOrders) bad(alpha_e.line, "at most 10 orders");
  for (double a : alphas) p.orders.push_back(Order::of(a));
  const auto& iv = r.need("problem", "interval");
  const auto ab = r.pair(iv, "interval");

  const auto& x_a = r.get("problem", "x_a");
  if (x_a && x_a->value == "free") {
    p.x_a.reset();
  } else {
    p.x_a = x_a ? r.number(*x_a, "x_a") : 0.0;
  }
  p.A = r.number("problem", "A");
  if (const auto* e = r.get("problem", "x_A_free")) {
    if (e->value != "true" && e->value != "false") bad(e->line, "x_A_free must be true or false");
    p.x_A_free = e->value == "true";
  }
  p.tau = r.number("problem", "tau");
  p.lambda = r.number("problem", "lambda_hint");

  // [psi]
  const auto& psi_e = r.need("psi", "expr");
  const Expr psi = r.expression(psi_e, "psi");
  expr::require_variables(psi, {"t"}, "psi");
  Expr dpsi;
  if (const auto* e = r.get("psi", "derivative")) {
    dpsi = r.expression(*e, "psi derivative");
    expr::require_variables(dpsi, {"t"}, "psi derivative");
  } else {
    dpsi = expr::differentiate(psi, "t");
  }
  out.expressions["psi"] = expr::print(psi);
  out.expressions["dpsi"] = expr::print(dpsi);
  p.psi = PsiMap(time_fn(psi), time_fn(dpsi), ab[0], ab[1]);

  // [lagrangian]
  const bool high = p.kind == ProblemKind::high_order;
  const std::size_t m = high ? p.orders.size() : 0;
  std::set<std::string> lag_vars{"t", "s", "alpha", "x", "d"};
  if (p.kind == ProblemKind::delay) lag_vars.insert("xtau");
  for (std::size_t k = 1; k <= m; ++k) lag_vars.insert("d" + std::to_string(k));
  const double alpha0 = p.orders.front().alpha;
  auto prepare = [&](const Expr& e) {
    // alpha is fixed per problem; d is the first derivative in high-order problems
    Expr x = expr::substitute(e, "alpha", alpha0);
    return high ? expr::rename(x, "d", "d1") : x;
  };
  const auto& L_e = r.need("lagrangian", "L");
  const Expr L_raw = r.expression(L_e, "L");
  expr::require_variables(L_raw, lag_vars, "L");
  const Expr L = prepare(L_raw);
  out.expressions["L"] = expr::print(L_raw);

  LagrangianDef& lag = p.lagrangian;
  lag.value = lag_fn(L, m);
  const Expr dLx = prepare(partial_of(r, L, "dL_dx", "x", lag_vars));
  lag.dx = {lag_fn(dLx, m)};
  out.expressions["dL_dx"] = expr::print(dLx);
  if (high) {
    for (std::size_t k = 1; k <= m; ++k) {
      const std::string name = "d" + std::to_string(k);
      const Expr dk = prepare(partial_of(r, L, "dL_dd" + std::to_string(k), name, lag_vars));
      lag.dd.push_back(lag_fn(dk, m));
      out.expressions["dL_" + name] = expr::print(dk);
    }
  } else {
    for (const auto& [key, entry] : f.sections.count("lagrangian") ? f.sections.at("lagrangian")
                                                                     : std::map<std::string, ProblemFile::Entry>{}) {
      if (is_indexed_partial(key)) bad(entry.line, key + " is only allowed for high-order problems");
    }
    const Expr dLd = prepare(partial_of(r, L, "dL_dd", "d", lag_vars));
    lag.dd = {lag_fn(dLd, m)};
    out.expressions["dL_dd"] = expr::print(dLd);
    if (const auto e = second_partial(dLx, "x")) lag.dxx = lag_fn(*e, m);
    if (const auto e = second_partial(dLx, "d")) lag.dxd = lag_fn(*e, m);
    if (const auto e = second_partial(dLd, "d")) {
      lag.ddd = lag_fn(*e, m);
      out.expressions["d2L_dd2"] = expr::print(*e);
    }
  }
  if (p.kind == ProblemKind::delay) {
    const Expr dLt = prepare(partial_of(r, L, "dL_dxtau", "xtau", lag_vars));
    lag.dxtau = lag_fn(dLt, m);
    out.expressions["dL_dxtau"] = expr::print(dLt);
  } else if (r.has("lagrangian", "dL_dxtau")) {
    bad(r.get("lagrangian", "dL_dxtau")->line, "dL_dxtau is only allowed for delay problems");
  }

  // [problem] history
  if (const auto* e = r.get("problem", "history")) {
    const Expr h = r.expression(*e, "history");
    expr::require_variables(h, {"t"}, "history");
    p.history = time_fn(h);
    out.expressions["history"] = expr::print(h);
  }

  // [constraint]
  if (f.sections.count("constraint")) {
    if (p.kind != ProblemKind::isoperimetric) {
      throw Error(ErrorCode::validation, "[constraint] is only allowed for isoperimetric problems");
    }
    const auto& M_e = r.need("constraint", "M");
    const Expr M_raw = r.expression(M_e, "M");
    expr::require_variables(M_raw, lag_vars, "M");
    const Expr M = prepare(M_raw);
    LagrangianDef c;
    c.value = lag_fn(M, m);
    const Expr dMx = expr::differentiate(M, "x");
    const Expr dMd = expr::differentiate(M, "d");
    c.dx = {lag_fn(dMx, m)};
    c.dd = {lag_fn(dMd, m)};
    p.constraint = c;
    out.expressions["M"] = expr::print(M_raw);
    if (const auto* e = r.get("constraint", "Phi")) {
      const Expr phi = prepare(r.expression(*e, "Phi"));
      expr::require_variables(phi, {"t"}, "Phi");
      p.phi = time_fn(phi);
      out.expressions["Phi"] = expr::print(phi);
    }
    if (const auto* e = r.get("constraint", "dPhi")) {
      const Expr dphi = prepare(r.expression(*e, "dPhi"));
      expr::require_variables(dphi, {"t"}, "dPhi");
      p.dphi = time_fn(dphi);
      out.expressions["dPhi"] = expr::print(dphi);
    }
  }

  // [candidate]
  if (const auto* e = r.get("candidate", "x")) {
    const Expr x = prepare(r.expression(*e, "candidate x"));
    expr::require_variables(x, {"t"}, "candidate x");
    Path path(time_fn(x));
    out.expressions["x"] = expr::print(x);
    std::optional<Expr> slope;
    if (const auto* de = r.get("candidate", "dx")) {
      slope = prepare(r.expression(*de, "candidate dx"));
      expr::require_variables(*slope, {"t"}, "candidate dx");
    } else {
      try {
        slope = expr::simplify(expr::binary(expr::BinOp::div, expr::differentiate(x, "t"), dpsi));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::non_differentiable) throw;
      }
    }
    if (slope) {
      path.with_derivative(time_fn(*slope));
      out.expressions["dx"] = expr::print(*slope);
      int need = 1;
      for (const auto& o : p.orders) need = std::max(need, o.n);
      std::vector<RealFn> higher;
      Expr cur = *slope;
      try {
        for (int k = 2; k <= need; ++k) {
          cur = expr::simplify(expr::binary(expr::BinOp::div, expr::differentiate(cur, "t"), dpsi));
          higher.push_back(time_fn(cur));
        }
      } catch (const Error& err) {
        if (err.code() != ErrorCode::non_differentiable) throw;
        higher.clear();
      }
      if (!higher.empty()) path.with_higher_derivatives(higher);
    }
    out.candidate = std::move(path);
  } else if (r.has("candidate", "dx")) {
    bad(r.get("candidate", "dx")->line, "dx needs x");
  }
  out.T = r.number("candidate", "T");
  if (out.T && !(*out.T > ab[0] && *out.T <= ab[1])) bad(r.get("candidate", "T")->line, "T must lie in (a, b]");

  // [grid]
  out.meta.N = r.integer("grid", "N", 2048);
  if (out.meta.N < 8) throw Error(ErrorCode::validation, "grid N must be >= 8");
  if (const auto* e = r.get("grid", "scheme")) out.meta.scheme = scheme_from(*e);
  out.grid = out.meta.scheme == GridScheme::uniform_in_psi ? QuadGrid::uniform_in_psi(p.psi, ab[0], ab[1], out.meta.N)
                                                           : QuadGrid::uniform_in_t(ab[0], ab[1], out.meta.N);
  if (out.candidate) out.meta.h_fd = Path::fd_step(p.psi);

  // [solver]
  if (const auto* e = r.get("solver", "T_bracket")) out.time_root.bracket = r.pair(*e, "T_bracket");
  if (const auto* e = r.get("solver", "alpha_bracket")) out.order_root.bracket = r.pair(*e, "alpha_bracket");
  for (RootConfig* c : {&out.time_root, &out.order_root}) {
    if (const auto v = r.number("solver", "tol_x")) c->tol_x = *v;
    if (const auto v = r.number("solver", "tol_f")) c->tol_f = *v;
    c->max_iter = r.integer("solver", "max_iter", c->max_iter);
    c->validate();
  }
  out.minimize.seed = static_cast<std::uint64_t>(r.integer("solver", "seed", 1));
  out.minimize.basis_size = r.integer("solver", "basis_size", out.minimize.basis_size);
  out.minimize.max_evals = r.integer("solver", "max_evals", out.minimize.max_evals);
  if (const auto v = r.number("solver", "simplex_scale")) out.minimize.simplex_scale = *v;
  if (out.time_root.bracket) out.minimize.T_bracket = out.time_root.bracket;
  out.minimize.validate();

  p.validate();
  return out;
}

LoadedProblem load_problem_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open problem file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_problem(ss.str());
}

}  // namespace psifrac
