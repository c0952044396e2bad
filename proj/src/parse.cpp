// Recursive-descent parser for the expression DSL.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// '^' binds tighter than unary minus, so "-x^2" is -(x^2), and it is right
// associative through `unary`. The exponent must fold to an integer constant.

#include <cctype>
#include <charconv>
#include <cmath>

#include "qslin/error.hpp"
#include "qslin/expr.hpp"

namespace qslin {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Expr parse_all() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= s_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::raw(Op::Add, {lhs, term()});
      } else if (accept('-')) {
        lhs = Expr::raw(Op::Sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::raw(Op::Mul, {lhs, unary()});
      } else if (accept('/')) {
        lhs = Expr::raw(Op::Div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return Expr::raw(Op::Neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t at = pos_;
    Expr ex = simplify(unary());
    if (!ex.is_constant()) fail_at("non-integer exponent", at);
    const double v = ex.value();
    if (!std::isfinite(v) || v != std::trunc(v) || std::abs(v) > 1e6) fail_at("non-integer exponent", at);
    return Expr::raw_pow(base, static_cast<int>(v));
  }

  Expr primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        ++pos_;
      }
      std::string name(s_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        ++pos_;
        return call(name, start);
      }
      return Expr::variable(name);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr call(const std::string& name, std::size_t at) {
    std::vector<Expr> args;
    if (!accept(')')) {
      do {
        args.push_back(expr());
      } while (accept(','));
      expect(')');
    }
    auto arity = [&](std::size_t n) {
      if (args.size() != n) {
        fail_at(name + " expects " + std::to_string(n) + " argument" + (n == 1 ? "" : "s"), at);
      }
    };
    if (name == "sin") return arity(1), Expr::raw(Op::Sin, std::move(args));
    if (name == "cos") return arity(1), Expr::raw(Op::Cos, std::move(args));
    if (name == "tan") return arity(1), Expr::raw(Op::Tan, std::move(args));
    if (name == "sqrt") return arity(1), Expr::raw(Op::Sqrt, std::move(args));
    if (name == "atan2") return arity(2), Expr::raw(Op::Atan2, std::move(args));
    fail_at("unknown function '" + name + "'", at);
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const char* first = s_.data() + start;
    const char* last = s_.data() + pos_;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) fail_at("malformed number", start);
    return Expr::constant(v);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace qslin
