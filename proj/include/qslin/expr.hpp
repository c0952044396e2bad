#pragma once

// Symbolic scalar expressions over named real variables.
//
// Expressions are immutable DAGs of reference-counted nodes. Sub-expressions
// are shared freely, so derivative and substitution passes memoize on node
// identity and never duplicate shared work. Add and Mul are n-ary; the
// arithmetic operators below build simplified nodes, while the parser keeps
// the literal binary shape of the input text.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qslin {

enum class Op : std::uint8_t { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Tan, Sqrt, Atan2 };

struct Node;

class Expr {
 public:
  /// The constant 0.
  Expr();

  static Expr constant(double value);
  static Expr variable(std::string_view name);

  /// Builds a node exactly as given, without any simplification.
  static Expr raw(Op op, std::vector<Expr> args);
  static Expr raw_pow(Expr base, int exponent);

  Op op() const noexcept;
  double value() const noexcept;
  const std::string& name() const noexcept;
  int exponent() const noexcept;
  std::span<const Expr> args() const noexcept;
  const Expr& arg(std::size_t i) const noexcept { return args()[i]; }

  std::size_t hash() const noexcept;
  /// Bloom mask of the free variables; a clear bit proves absence.
  std::uint64_t var_mask() const noexcept;
  const Node* id() const noexcept { return node_.get(); }

  bool is_constant() const noexcept { return op() == Op::Const; }
  bool is_constant(double c) const noexcept { return op() == Op::Const && value() == c; }
  bool is_variable() const noexcept { return op() == Op::Var; }

  /// Structural equality.
  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  std::string name;
  int exponent = 0;
  std::vector<Expr> args;
  std::size_t hash = 0;
  std::uint64_t mask = 0;
};

using VarBinding = std::unordered_map<std::string, double>;
using Substitution = std::unordered_map<std::string, Expr>;

// Simplifying constructors.
Expr operator-(const Expr& a);
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr add(std::vector<Expr> terms);
Expr mul(std::vector<Expr> factors);
Expr pow(const Expr& base, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr tan(const Expr& a);
Expr sqrt(const Expr& a);
Expr atan2(const Expr& y, const Expr& x);

/// Parses the infix DSL. Throws ParseError with the byte position.
Expr parse(std::string_view text);

/// Canonical fully parenthesized infix form.
std::string print(const Expr& e);

/// Symbolic partial derivative; all other variables are constants.
Expr diff(const Expr& e, std::string_view var);

/// Evaluates in double precision. Throws EvalError on an unbound variable,
/// division by zero or the square root of a negative number.
double eval(const Expr& e, const VarBinding& binding);

/// Simultaneous substitution of variables by expressions.
Expr substitute(const Expr& e, const Substitution& map);

/// Conservative simplification: constant folding, 0/1 identities,
/// sin(0)/cos(0), and flattening of left-nested Add/Mul chains. The result
/// evaluates bit-identically to the input wherever the input is defined.
Expr simplify(const Expr& e);

/// Flattens all nested Add/Mul and folds negated literals. Two expressions
/// that print the same normalize to structurally equal trees.
Expr normalize(const Expr& e);

std::set<std::string> free_variables(const Expr& e);
bool depends_on(const Expr& e, std::string_view var);

/// Number of distinct nodes in the DAG.
std::size_t node_count(const Expr& e);

}  // namespace qslin
