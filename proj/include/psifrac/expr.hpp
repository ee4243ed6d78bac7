#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace psifrac::expr {

enum class Func { neg, exp, ln, sqrt, sin, cos, gammafn };
enum class BinOp { add, sub, mul, div, pow };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { constant, variable, unary, binary };
  Kind kind = Kind::constant;
  double value = 0.0;  // constant
  std::string name;    // variable
  Func func = Func::neg;
  BinOp op = BinOp::add;
  Expr lhs;  // unary operand or left operand
  Expr rhs;
};

Expr constant(double v);
Expr variable(std::string name);
Expr unary(Func f, Expr operand);
Expr binary(BinOp op, Expr lhs, Expr rhs);

const char* to_string(Func f);
const char* to_string(BinOp op);

/// True for t, x, d, xtau, s, alpha, pi, e and the indexed forms x1, x2, ...,
/// d1, d2, ...
bool is_known_variable(std::string_view name);

/// Precedence: ^ (right-associative) > unary minus > * / > + -.
/// Errors carry "line L, column C" and use ErrorCode::syntax or
/// ErrorCode::unknown_identifier.
Expr parse(std::string_view source);

/// Text that parses back to the same tree.
std::string print(const Expr& e);

bool same(const Expr& a, const Expr& b);

std::set<std::string> free_variables(const Expr& e);
bool depends_on(const Expr& e, std::string_view name);

/// Throws Error(validation) naming `slot` when e uses a variable outside `allowed`
/// (pi and e are always allowed).
void require_variables(const Expr& e, const std::set<std::string>& allowed, std::string_view slot);

/// Replaces a variable by a constant and folds.
Expr substitute(const Expr& e, std::string_view name, double value);

/// Renames a variable.
Expr rename(const Expr& e, std::string_view from, const std::string& to);

/// Constant folding and the identities 0+a, a*1, a^1, a^0, ...
Expr simplify(const Expr& e);

/// Symbolic partial derivative with constant folding. Throws
/// Error(non_differentiable) for gammafn of an argument that depends on wrt.
Expr differentiate(const Expr& e, std::string_view wrt);

/// Tree evaluation with pi and e built in. Throws Error(unbound_variable) or
/// Error(domain) / Error(pole).
double evaluate(const Expr& e, const std::map<std::string, double, std::less<>>& env);

/// Expression compiled against a fixed variable layout for repeated evaluation.
class Program {
 public:
  Program() = default;
  /// Throws Error(unbound_variable) if e uses a name missing from `layout`.
  Program(const Expr& e, const std::vector<std::string>& layout);

  double operator()(std::span<const double> values) const;
  bool empty() const { return code_.empty(); }

  struct Instr {
    enum class Kind : unsigned char { push_const, push_var, unary, binary } kind;
    unsigned char sub;  // Func or BinOp
    bool const_exponent;
    double value;
    std::size_t index;
  };

 private:
  std::vector<Instr> code_;
  std::size_t depth_ = 0;
};

}  // namespace psifrac::expr
