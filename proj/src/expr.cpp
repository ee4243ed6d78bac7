#include "psifrac/expr.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <algorithm>

#include "psifrac/error.hpp"
#include "psifrac/special_functions.hpp"

namespace psifrac::expr {

namespace {

using Kind = Node::Kind;

// --- lexer ---------------------------------------------------------------

struct Token {
  enum class Type { number, ident, op, lparen, rparen, end } type;
  std::string text;
  double value = 0.0;
  std::size_t offset = 0;
};

std::string where(std::string_view src, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < offset && i < src.size(); ++i) {
    if (src[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void fail(ErrorCode code, std::string_view src, std::size_t offset, const std::string& msg) {
  throw Error(code, where(src, offset) + ": " + msg);
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (is_digit(c) || (c == '.' && i + 1 < src.size() && is_digit(src[i + 1]))) {
      while (i < src.size() && is_digit(src[i])) ++i;
      if (i < src.size() && src[i] == '.') {
        ++i;
        while (i < src.size() && is_digit(src[i])) ++i;
      }
      if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < src.size() && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < src.size() && is_digit(src[j])) {
          i = j;
          while (i < src.size() && is_digit(src[i])) ++i;
        }
      }
      Token t{Token::Type::number, std::string(src.substr(start, i - start)), 0.0, start};
      const auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
      if (r.ec != std::errc() || r.ptr != t.text.data() + t.text.size() || !std::isfinite(t.value)) {
        fail(ErrorCode::syntax, src, start, "malformed number '" + t.text + "'");
      }
      out.push_back(std::move(t));
      continue;
    }
    if (is_ident_start(c)) {
      while (i < src.size() && is_ident_char(src[i])) ++i;
      out.push_back({Token::Type::ident, std::string(src.substr(start, i - start)), 0.0, start});
      continue;
    }
    ++i;
    switch (c) {
      case '+':
      case '-':
      case '*':
      case '/':
      case '^':
        out.push_back({Token::Type::op, std::string(1, c), 0.0, start});
        break;
      case '(':
        out.push_back({Token::Type::lparen, "(", 0.0, start});
        break;
      case ')':
        out.push_back({Token::Type::rparen, ")", 0.0, start});
        break;
      default:
        fail(ErrorCode::syntax, src, start, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Token::Type::end, "", 0.0, src.size()});
  return out;
}

// --- parser --------------------------------------------------------------

const std::array<std::pair<std::string_view, Func>, 7> kFuncs{{{"neg", Func::neg},
                                                                {"exp", Func::exp},
                                                                {"ln", Func::ln},
                                                                {"sqrt", Func::sqrt},
                                                                {"sin", Func::sin},
                                                                {"cos", Func::cos},
                                                                {"gammafn", Func::gammafn}}};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), toks_(lex(src)) {}

  Expr run() {
    if (toks_.front().type == Token::Type::end) fail(ErrorCode::syntax, src_, 0, "empty expression");
    Expr e = sum();
    if (peek().type != Token::Type::end) unexpected("end of input");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool at_op(char c) const { return peek().type == Token::Type::op && peek().text[0] == c; }

  [[noreturn]] void unexpected(const char* wanted) const {
    const auto& t = peek();
    const std::string got = t.type == Token::Type::end ? "end of input" : "'" + t.text + "'";
    fail(ErrorCode::syntax, src_, t.offset, std::string("expected ") + wanted + ", found " + got);
  }

  Expr sum() {
    Expr e = term();
    while (at_op('+') || at_op('-')) {
      const BinOp op = next().text[0] == '+' ? BinOp::add : BinOp::sub;
      e = binary(op, e, term());
    }
    return e;
  }

  Expr term() {
    Expr e = signed_factor();
    while (at_op('*') || at_op('/')) {
      const BinOp op = next().text[0] == '*' ? BinOp::mul : BinOp::div;
      e = binary(op, e, signed_factor());
    }
    return e;
  }

  Expr signed_factor() {
    if (at_op('-')) {
      next();
      return unary(Func::neg, signed_factor());
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (at_op('^')) {
      next();
      return binary(BinOp::pow, base, signed_factor());
    }
    return base;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.type) {
      case Token::Type::number:
        next();
        return constant(t.value);
      case Token::Type::lparen: {
        next();
        Expr e = sum();
        if (peek().type != Token::Type::rparen) unexpected("')'");
        next();
        return e;
      }
      case Token::Type::ident: {
        next();
        for (const auto& [name, f] : kFuncs) {
          if (t.text != name) continue;
          if (peek().type != Token::Type::lparen) unexpected("'(' after function name");
          next();
          Expr arg = sum();
          if (peek().type != Token::Type::rparen) unexpected("')'");
          next();
          return unary(f, arg);
        }
        if (peek().type == Token::Type::lparen) {
          fail(ErrorCode::unknown_identifier, src_, t.offset, "unknown function '" + t.text + "'");
        }
        if (!is_known_variable(t.text)) {
          fail(ErrorCode::unknown_identifier, src_, t.offset, "unknown identifier '" + t.text + "'");
        }
        return variable(t.text);
      }
      default:
        unexpected("a number, variable, function or '('");
    }
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// --- printer -------------------------------------------------------------

int precedence(const Node& n) {
  switch (n.kind) {
    case Kind::constant:
      return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    case Kind::variable:
      return 5;
    case Kind::unary:
      return n.func == Func::neg ? 3 : 5;
    case Kind::binary:
      switch (n.op) {
        case BinOp::add:
        case BinOp::sub:
          return 1;
        case BinOp::mul:
        case BinOp::div:
          return 2;
        case BinOp::pow:
          return 4;
      }
  }
  return 5;
}

std::string number_text(double v) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

void emit(const Node& n, std::string& out);

void emit_wrapped(const Node& n, bool parens, std::string& out) {
  if (parens) out += '(';
  emit(n, out);
  if (parens) out += ')';
}

void emit(const Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::constant:
      out += number_text(n.value);
      return;
    case Kind::variable:
      out += n.name;
      return;
    case Kind::unary:
      if (n.func == Func::neg) {
        out += '-';
        emit_wrapped(*n.lhs, precedence(*n.lhs) < 3, out);
      } else {
        out += to_string(n.func);
        emit_wrapped(*n.lhs, true, out);
      }
      return;
    case Kind::binary: {
      const int p = precedence(n);
      if (n.op == BinOp::pow) {
        emit_wrapped(*n.lhs, precedence(*n.lhs) <= 4, out);
        out += '^';
        emit_wrapped(*n.rhs, precedence(*n.rhs) < 3, out);
        return;
      }
      emit_wrapped(*n.lhs, precedence(*n.lhs) < p, out);
      switch (n.op) {
        case BinOp::add:
          out += " + ";
          break;
        case BinOp::sub:
          out += " - ";
          break;
        case BinOp::mul:
          out += '*';
          break;
        default:
          out += '/';
          break;
      }
      emit_wrapped(*n.rhs, precedence(*n.rhs) <= p, out);
      return;
    }
  }
}

// --- folding constructors ------------------------------------------------

bool is_const(const Expr& e, double v) { return e->kind == Kind::constant && e->value == v; }
bool is_const(const Expr& e) { return e->kind == Kind::constant; }

// no variables other than pi and e
bool fixed(const Expr& e) {
  switch (e->kind) {
    case Kind::constant:
      return true;
    case Kind::variable:
      return e->name == "pi" || e->name == "e";
    case Kind::unary:
      return fixed(e->lhs);
    case Kind::binary:
      return fixed(e->lhs) && fixed(e->rhs);
  }
  return false;
}

double apply(Func f, double v) {
  switch (f) {
    case Func::neg:
      return -v;
    case Func::exp:
      return std::exp(v);
    case Func::ln:
      if (!(v > 0.0)) throw Error(ErrorCode::domain, "ln of non-positive value " + number_text(v));
      return std::log(v);
    case Func::sqrt:
      if (v < 0.0) throw Error(ErrorCode::domain, "sqrt of negative value " + number_text(v));
      return std::sqrt(v);
    case Func::sin:
      return std::sin(v);
    case Func::cos:
      return std::cos(v);
    case Func::gammafn:
      return psifrac::gamma(v);
  }
  return v;
}

double apply(BinOp op, double a, double b, bool const_exponent) {
  switch (op) {
    case BinOp::add:
      return a + b;
    case BinOp::sub:
      return a - b;
    case BinOp::mul:
      return a * b;
    case BinOp::div:
      if (b == 0.0) throw Error(ErrorCode::pole, "division by zero");
      return a / b;
    case BinOp::pow: {
      if (!const_exponent && !(a > 0.0)) {
        throw Error(ErrorCode::domain, "'^' with a non-constant exponent needs a positive base, got " + number_text(a));
      }
      const double r = std::pow(a, b);
      if (std::isnan(r)) {
        throw Error(ErrorCode::domain, "negative base " + number_text(a) + " with non-integer exponent " + number_text(b));
      }
      return r;
    }
  }
  return 0.0;
}

Expr fold_unary(Func f, Expr a) {
  if (f == Func::neg && a->kind == Kind::unary && a->func == Func::neg) return a->lhs;
  if (is_const(a)) {
    try {
      const double v = apply(f, a->value);
      if (std::isfinite(v)) return constant(v);
    } catch (const Error&) {
      // leave unfolded; evaluation reports the error
    }
  }
  return unary(f, std::move(a));
}

Expr fold_binary(BinOp op, Expr a, Expr b) {
  if (is_const(a) && is_const(b)) {
    try {
      const double v = apply(op, a->value, b->value, true);
      if (std::isfinite(v)) return constant(v);
    } catch (const Error&) {
    }
  }
  switch (op) {
    case BinOp::add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case BinOp::sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return fold_unary(Func::neg, b);
      break;
    case BinOp::mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return constant(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      break;
    case BinOp::div:
      if (is_const(a, 0.0)) return constant(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case BinOp::pow:
      if (is_const(b, 0.0)) return constant(1.0);
      if (is_const(b, 1.0)) return a;
      break;
  }
  return binary(op, std::move(a), std::move(b));
}

Expr add(Expr a, Expr b) { return fold_binary(BinOp::add, std::move(a), std::move(b)); }
Expr sub(Expr a, Expr b) { return fold_binary(BinOp::sub, std::move(a), std::move(b)); }
Expr mul(Expr a, Expr b) { return fold_binary(BinOp::mul, std::move(a), std::move(b)); }
Expr div(Expr a, Expr b) { return fold_binary(BinOp::div, std::move(a), std::move(b)); }
Expr pow(Expr a, Expr b) { return fold_binary(BinOp::pow, std::move(a), std::move(b)); }
Expr fn(Func f, Expr a) { return fold_unary(f, std::move(a)); }

void collect(const Expr& e, std::set<std::string>& out) {
  switch (e->kind) {
    case Kind::constant:
      return;
    case Kind::variable:
      out.insert(e->name);
      return;
    case Kind::unary:
      collect(e->lhs, out);
      return;
    case Kind::binary:
      collect(e->lhs, out);
      collect(e->rhs, out);
      return;
  }
}

std::optional<double> builtin(std::string_view name) {
  if (name == "pi") return std::numbers::pi;
  if (name == "e") return std::numbers::e;
  return std::nullopt;
}

}  // namespace

Expr constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::constant;
  n->value = v;
  return n;
}

Expr variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::variable;
  n->name = std::move(name);
  return n;
}

Expr unary(Func f, Expr operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::unary;
  n->func = f;
  n->lhs = std::move(operand);
  return n;
}

Expr binary(BinOp op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::binary;
  n->op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

const char* to_string(Func f) {
  for (const auto& [name, g] : kFuncs) {
    if (g == f) return name.data();
  }
  return "?";
}

const char* to_string(BinOp op) {
  switch (op) {
    case BinOp::add:
      return "+";
    case BinOp::sub:
      return "-";
    case BinOp::mul:
      return "*";
    case BinOp::div:
      return "/";
    case BinOp::pow:
      return "^";
  }
  return "?";
}

bool is_known_variable(std::string_view name) {
  for (std::string_view v : {"t", "x", "d", "xtau", "s", "alpha", "pi", "e"}) {
    if (name == v) return true;
  }
  if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'd') && name[1] >= '1' && name[1] <= '9') {
    for (std::size_t i = 2; i < name.size(); ++i) {
      if (!is_digit(name[i])) return false;
    }
    return true;
  }
  return false;
}

Expr parse(std::string_view source) { return Parser(source).run(); }

std::string print(const Expr& e) {
  std::string out;
  emit(*e, out);
  return out;
}

bool same(const Expr& a, const Expr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Kind::constant:
      return a->value == b->value && std::signbit(a->value) == std::signbit(b->value);
    case Kind::variable:
      return a->name == b->name;
    case Kind::unary:
      return a->func == b->func && same(a->lhs, b->lhs);
    case Kind::binary:
      return a->op == b->op && same(a->lhs, b->lhs) && same(a->rhs, b->rhs);
  }
  return false;
}

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect(e, out);
  return out;
}

bool depends_on(const Expr& e, std::string_view name) {
  switch (e->kind) {
    case Kind::constant:
      return false;
    case Kind::variable:
      return e->name == name;
    case Kind::unary:
      return depends_on(e->lhs, name);
    case Kind::binary:
      return depends_on(e->lhs, name) || depends_on(e->rhs, name);
  }
  return false;
}

void require_variables(const Expr& e, const std::set<std::string>& allowed, std::string_view slot) {
  for (const auto& v : free_variables(e)) {
    if (builtin(v) || allowed.count(v)) continue;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw Error(ErrorCode::validation,
                std::string(slot) + " may not use '" + v + "' (allowed: " + list + ")");
  }
}

Expr simplify(const Expr& e) {
  switch (e->kind) {
    case Kind::constant:
    case Kind::variable:
      return e;
    case Kind::unary:
      return fold_unary(e->func, simplify(e->lhs));
    case Kind::binary:
      return fold_binary(e->op, simplify(e->lhs), simplify(e->rhs));
  }
  return e;
}

Expr substitute(const Expr& e, std::string_view name, double value) {
  switch (e->kind) {
    case Kind::constant:
      return e;
    case Kind::variable:
      return e->name == name ? constant(value) : e;
    case Kind::unary:
      return fold_unary(e->func, substitute(e->lhs, name, value));
    case Kind::binary:
      return fold_binary(e->op, substitute(e->lhs, name, value), substitute(e->rhs, name, value));
  }
  return e;
}

Expr rename(const Expr& e, std::string_view from, const std::string& to) {
  switch (e->kind) {
    case Kind::constant:
      return e;
    case Kind::variable:
      return e->name == from ? variable(to) : e;
    case Kind::unary:
      return unary(e->func, rename(e->lhs, from, to));
    case Kind::binary:
      return binary(e->op, rename(e->lhs, from, to), rename(e->rhs, from, to));
  }
  return e;
}

Expr differentiate(const Expr& e, std::string_view wrt) {
  switch (e->kind) {
    case Kind::constant:
      return constant(0.0);
    case Kind::variable:
      return constant(e->name == wrt ? 1.0 : 0.0);
    case Kind::unary: {
      const Expr& u = e->lhs;
      if (e->func == Func::gammafn) {
        if (depends_on(u, wrt)) {
          throw Error(ErrorCode::non_differentiable,
                      "gammafn(" + print(u) + ") depends on " + std::string(wrt) + " and cannot be differentiated");
        }
        return constant(0.0);
      }
      const Expr du = differentiate(u, wrt);
      if (is_const(du, 0.0)) return du;
      switch (e->func) {
        case Func::neg:
          return fn(Func::neg, du);
        case Func::exp:
          return mul(fn(Func::exp, u), du);
        case Func::ln:
          return div(du, u);
        case Func::sqrt:
          return div(du, mul(constant(2.0), fn(Func::sqrt, u)));
        case Func::sin:
          return mul(fn(Func::cos, u), du);
        case Func::cos:
          return fn(Func::neg, mul(fn(Func::sin, u), du));
        case Func::gammafn:
          break;
      }
      return constant(0.0);
    }
    case Kind::binary: {
      const Expr& u = e->lhs;
      const Expr& v = e->rhs;
      const Expr du = differentiate(u, wrt);
      const Expr dv = differentiate(v, wrt);
      switch (e->op) {
        case BinOp::add:
          return add(du, dv);
        case BinOp::sub:
          return sub(du, dv);
        case BinOp::mul:
          return add(mul(du, v), mul(u, dv));
        case BinOp::div:
          if (is_const(dv, 0.0)) return div(du, v);
          return div(sub(mul(du, v), mul(u, dv)), pow(v, constant(2.0)));
        case BinOp::pow:
          if (is_const(dv, 0.0)) {
            if (is_const(du, 0.0)) return constant(0.0);
            const Expr lowered = is_const(v) ? constant(v->value - 1.0) : sub(v, constant(1.0));
            return mul(mul(v, pow(u, lowered)), du);
          }
          if (is_const(du, 0.0)) return mul(mul(e, fn(Func::ln, u)), dv);
          return mul(e, add(mul(dv, fn(Func::ln, u)), div(mul(v, du), u)));
      }
    }
  }
  return constant(0.0);
}

double evaluate(const Expr& e, const std::map<std::string, double, std::less<>>& env) {
  switch (e->kind) {
    case Kind::constant:
      return e->value;
    case Kind::variable: {
      if (const auto it = env.find(e->name); it != env.end()) return it->second;
      if (const auto b = builtin(e->name)) return *b;
      throw Error(ErrorCode::unbound_variable, "variable '" + e->name + "' is not bound");
    }
    case Kind::unary:
      return apply(e->func, evaluate(e->lhs, env));
    case Kind::binary:
      return apply(e->op, evaluate(e->lhs, env), evaluate(e->rhs, env), fixed(e->rhs));
  }
  return 0.0;
}

// --- compiled programs ---------------------------------------------------

namespace {

void compile(const Expr& e, const std::vector<std::string>& layout, std::vector<Program::Instr>& code,
             std::size_t& depth, std::size_t& max_depth);

}  // namespace

Program::Program(const Expr& e, const std::vector<std::string>& layout) {
  std::size_t depth = 0;
  compile(e, layout, code_, depth, depth_);
}

double Program::operator()(std::span<const double> values) const {
  std::array<double, 64> small{};
  std::vector<double> big;
  double* st = small.data();
  if (depth_ > small.size()) {
    big.resize(depth_);
    st = big.data();
  }
  std::size_t sp = 0;
  for (const auto& in : code_) {
    switch (in.kind) {
      case Instr::Kind::push_const:
        st[sp++] = in.value;
        break;
      case Instr::Kind::push_var:
        st[sp++] = values[in.index];
        break;
      case Instr::Kind::unary:
        st[sp - 1] = apply(static_cast<Func>(in.sub), st[sp - 1]);
        break;
      case Instr::Kind::binary:
        st[sp - 2] = apply(static_cast<BinOp>(in.sub), st[sp - 2], st[sp - 1], in.const_exponent);
        --sp;
        break;
    }
  }
  return st[0];
}

namespace {

void compile(const Expr& e, const std::vector<std::string>& layout, std::vector<Program::Instr>& code,
             std::size_t& depth, std::size_t& max_depth) {
  using I = Program::Instr;
  auto push = [&](I in) {
    code.push_back(in);
    if (in.kind == I::Kind::push_const || in.kind == I::Kind::push_var) {
      max_depth = std::max(max_depth, ++depth);
    } else if (in.kind == I::Kind::binary) {
      --depth;
    }
  };
  switch (e->kind) {
    case Kind::constant:
      push({I::Kind::push_const, 0, false, e->value, 0});
      return;
    case Kind::variable: {
      for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i] == e->name) {
          push({I::Kind::push_var, 0, false, 0.0, i});
          return;
        }
      }
      if (const auto b = builtin(e->name)) {
        push({I::Kind::push_const, 0, false, *b, 0});
        return;
      }
      throw Error(ErrorCode::unbound_variable, "variable '" + e->name + "' is not available here");
    }
    case Kind::unary:
      compile(e->lhs, layout, code, depth, max_depth);
      push({I::Kind::unary, static_cast<unsigned char>(e->func), false, 0.0, 0});
      return;
    case Kind::binary:
      compile(e->lhs, layout, code, depth, max_depth);
      compile(e->rhs, layout, code, depth, max_depth);
      push({I::Kind::binary, static_cast<unsigned char>(e->op), fixed(e->rhs), 0.0, 0});
      return;
  }
}

}  // namespace

}  // namespace psifrac::expr
