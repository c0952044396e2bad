#include "qslin/expr.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_set>

#include "qslin/error.hpp"
#include "qslin/program.hpp"

namespace qslin {

namespace {

std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

std::uint64_t name_bit(const std::string& name) {
  return std::uint64_t{1} << (std::hash<std::string>{}(name) % 64);
}

std::shared_ptr<const Node> make_node(Op op, double value, std::string name, int exponent,
                                      std::vector<Expr> args) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = value;
  n->name = std::move(name);
  n->exponent = exponent;
  n->args = std::move(args);
  std::size_t h = static_cast<std::size_t>(op) * 1315423911u;
  switch (op) {
    case Op::Const:
      h = mix(h, std::hash<double>{}(value));
      break;
    case Op::Var:
      h = mix(h, std::hash<std::string>{}(n->name));
      n->mask = name_bit(n->name);
      break;
    case Op::Pow:
      h = mix(h, std::hash<int>{}(exponent));
      break;
    default:
      break;
  }
  for (const auto& a : n->args) {
    h = mix(h, a.hash());
    n->mask |= a.var_mask();
  }
  n->hash = h;
  return n;
}

const Expr& zero() {
  static const Expr z = Expr::constant(0.0);
  return z;
}

const Expr& one() {
  static const Expr o = Expr::constant(1.0);
  return o;
}

}  // namespace

Expr::Expr() : node_(zero().node_) {}

Expr Expr::constant(double value) { return Expr(make_node(Op::Const, value, {}, 0, {})); }

Expr Expr::variable(std::string_view name) {
  return Expr(make_node(Op::Var, 0.0, std::string(name), 0, {}));
}

Expr Expr::raw(Op op, std::vector<Expr> args) {
  return Expr(make_node(op, 0.0, {}, 0, std::move(args)));
}

Expr Expr::raw_pow(Expr base, int exponent) {
  return Expr(make_node(Op::Pow, 0.0, {}, exponent, {std::move(base)}));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
const std::string& Expr::name() const noexcept { return node_->name; }
int Expr::exponent() const noexcept { return node_->exponent; }
std::span<const Expr> Expr::args() const noexcept { return node_->args; }
std::size_t Expr::hash() const noexcept { return node_->hash; }
std::uint64_t Expr::var_mask() const noexcept { return node_->mask; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.id() == b.id()) return true;
  if (a.hash() != b.hash() || a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Const:
      return a.value() == b.value() || (std::isnan(a.value()) && std::isnan(b.value()));
    case Op::Var:
      return a.name() == b.name();
    case Op::Pow:
      if (a.exponent() != b.exponent()) return false;
      break;
    default:
      break;
  }
  if (a.args().size() != b.args().size()) return false;
  for (std::size_t i = 0; i < a.args().size(); ++i) {
    if (!(a.args()[i] == b.args()[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Simplifying constructors

double ipow(double base, int exponent) {
  if (exponent < 0) {
    if (base == 0.0) throw EvalError("division by zero in negative power");
    return 1.0 / ipow(base, -exponent);
  }
  double result = 1.0;
  double b = base;
  int e = exponent;
  while (e > 0) {
    if (e & 1) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.value());
  if (a.op() == Op::Neg) return a.arg(0);
  return Expr::raw(Op::Neg, {a});
}

Expr add(std::vector<Expr> terms) {
  std::vector<Expr> out;
  out.reserve(terms.size() + 2);
  bool first = true;
  for (auto& t : terms) {
    if (first && t.op() == Op::Add) {
      for (const auto& s : t.args()) out.push_back(s);
    } else if (!t.is_constant(0.0)) {
      out.push_back(std::move(t));
    }
    first = false;
  }
  // Fold the leading run of constants; evaluation is left to right, so the
  // folded value is exactly what evaluation would produce.
  std::size_t lead = 0;
  while (lead < out.size() && out[lead].is_constant()) ++lead;
  if (lead >= 2) {
    double s = out[0].value();
    for (std::size_t i = 1; i < lead; ++i) s += out[i].value();
    out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(lead));
    out.insert(out.begin(), Expr::constant(s));
  }
  if (out.size() >= 2 && out[0].is_constant(0.0)) out.erase(out.begin());
  if (out.empty()) return zero();
  if (out.size() == 1) return out[0];
  return Expr::raw(Op::Add, std::move(out));
}

Expr mul(std::vector<Expr> factors) {
  std::vector<Expr> out;
  out.reserve(factors.size() + 2);
  bool first = true;
  for (auto& f : factors) {
    if (f.is_constant(0.0)) return zero();
    if (first && f.op() == Op::Mul) {
      for (const auto& s : f.args()) out.push_back(s);
    } else if (!f.is_constant(1.0)) {
      out.push_back(std::move(f));
    }
    first = false;
  }
  std::size_t lead = 0;
  while (lead < out.size() && out[lead].is_constant()) ++lead;
  if (lead >= 2) {
    double p = out[0].value();
    for (std::size_t i = 1; i < lead; ++i) p *= out[i].value();
    out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(lead));
    out.insert(out.begin(), Expr::constant(p));
  }
  if (!out.empty() && out[0].is_constant(0.0)) return zero();
  if (out.size() >= 2 && out[0].is_constant(1.0)) out.erase(out.begin());
  if (out.empty()) return one();
  if (out.size() == 1) return out[0];
  if (out.size() == 2 && out[0].is_constant(-1.0)) return -out[1];
  return Expr::raw(Op::Mul, std::move(out));
}

Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }

Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return -b;
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
  return Expr::raw(Op::Sub, {a, b});
}

Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0)) return zero();
  if (a.is_constant() && b.is_constant() && b.value() != 0.0) {
    return Expr::constant(a.value() / b.value());
  }
  return Expr::raw(Op::Div, {a, b});
}

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return one();
  if (exponent == 1) return base;
  if (base.is_constant() && !(base.value() == 0.0 && exponent < 0)) {
    return Expr::constant(ipow(base.value(), exponent));
  }
  return Expr::raw_pow(base, exponent);
}

Expr sin(const Expr& a) {
  if (a.is_constant()) return Expr::constant(std::sin(a.value()));
  return Expr::raw(Op::Sin, {a});
}

Expr cos(const Expr& a) {
  if (a.is_constant()) return Expr::constant(std::cos(a.value()));
  return Expr::raw(Op::Cos, {a});
}

Expr tan(const Expr& a) {
  if (a.is_constant()) return Expr::constant(std::tan(a.value()));
  return Expr::raw(Op::Tan, {a});
}

Expr sqrt(const Expr& a) {
  if (a.is_constant() && a.value() >= 0.0) return Expr::constant(std::sqrt(a.value()));
  return Expr::raw(Op::Sqrt, {a});
}

Expr atan2(const Expr& y, const Expr& x) {
  if (y.is_constant() && x.is_constant()) return Expr::constant(std::atan2(y.value(), x.value()));
  return Expr::raw(Op::Atan2, {y, x});
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  return s;
}

void print_to(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Const: {
      double v = e.value();
      if (std::signbit(v)) {
        out += "(-";
        out += format_number(-v);
        out += ')';
      } else {
        out += format_number(v);
      }
      return;
    }
    case Op::Var:
      out += e.name();
      return;
    case Op::Neg:
      out += "(-";
      print_to(e.arg(0), out);
      out += ')';
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const char* sep = e.op() == Op::Add   ? " + "
                        : e.op() == Op::Sub ? " - "
                        : e.op() == Op::Mul ? " * "
                                            : " / ";
      out += '(';
      for (std::size_t i = 0; i < e.args().size(); ++i) {
        if (i) out += sep;
        print_to(e.arg(i), out);
      }
      out += ')';
      return;
    }
    case Op::Pow:
      out += '(';
      print_to(e.arg(0), out);
      out += " ^ ";
      if (e.exponent() < 0) {
        out += "(-" + std::to_string(-e.exponent()) + ")";
      } else {
        out += std::to_string(e.exponent());
      }
      out += ')';
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Tan:
    case Op::Sqrt: {
      const char* fn = e.op() == Op::Sin ? "sin" : e.op() == Op::Cos ? "cos" : e.op() == Op::Tan ? "tan" : "sqrt";
      out += fn;
      out += '(';
      print_to(e.arg(0), out);
      out += ')';
      return;
    }
    case Op::Atan2:
      out += "atan2(";
      print_to(e.arg(0), out);
      out += ", ";
      print_to(e.arg(1), out);
      out += ')';
      return;
  }
}

}  // namespace

std::string print(const Expr& e) {
  std::string out;
  print_to(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Memoized DAG rewriting

namespace {

template <typename F>
class Rewriter {
 public:
  explicit Rewriter(F f) : f_(std::move(f)) {}

  Expr operator()(const Expr& e) {
    auto it = memo_.find(e.id());
    if (it != memo_.end()) return it->second;
    Expr r = f_(*this, e);
    memo_.emplace(e.id(), r);
    return r;
  }

 private:
  F f_;
  std::unordered_map<const Node*, Expr> memo_;
};

template <typename F>
Rewriter<F> make_rewriter(F f) {
  return Rewriter<F>(std::move(f));
}

/// Rebuilds `e` with new children using the simplifying constructors.
Expr rebuild(const Expr& e, std::vector<Expr> a) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var:
      return e;
    case Op::Neg:
      return -a[0];
    case Op::Add:
      return add(std::move(a));
    case Op::Sub:
      return a[0] - a[1];
    case Op::Mul:
      return mul(std::move(a));
    case Op::Div:
      return a[0] / a[1];
    case Op::Pow:
      return pow(a[0], e.exponent());
    case Op::Sin:
      return sin(a[0]);
    case Op::Cos:
      return cos(a[0]);
    case Op::Tan:
      return tan(a[0]);
    case Op::Sqrt:
      return sqrt(a[0]);
    case Op::Atan2:
      return atan2(a[0], a[1]);
  }
  return e;
}

}  // namespace

Expr diff(const Expr& e, std::string_view var) {
  const std::string v(var);
  const std::uint64_t bit = name_bit(v);
  auto d = make_rewriter([&](auto& self, const Expr& x) -> Expr {
    if ((x.var_mask() & bit) == 0) return zero();
    const auto args = x.args();
    switch (x.op()) {
      case Op::Const:
        return zero();
      case Op::Var:
        return x.name() == v ? one() : zero();
      case Op::Neg:
        return -self(args[0]);
      case Op::Add: {
        std::vector<Expr> terms;
        for (const auto& a : args) terms.push_back(self(a));
        return add(std::move(terms));
      }
      case Op::Sub:
        return self(args[0]) - self(args[1]);
      case Op::Mul: {
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < args.size(); ++i) {
          Expr di = self(args[i]);
          if (di.is_constant(0.0)) continue;
          std::vector<Expr> f;
          f.reserve(args.size());
          for (std::size_t j = 0; j < args.size(); ++j) f.push_back(j == i ? di : args[j]);
          terms.push_back(mul(std::move(f)));
        }
        return add(std::move(terms));
      }
      case Op::Div: {
        Expr da = self(args[0]);
        Expr db = self(args[1]);
        Expr r = da / args[1];
        if (!db.is_constant(0.0)) r = r - (args[0] * db) / pow(args[1], 2);
        return r;
      }
      case Op::Pow: {
        const int n = x.exponent();
        Expr da = self(args[0]);
        return mul({Expr::constant(n), pow(args[0], n - 1), da});
      }
      case Op::Sin:
        return cos(args[0]) * self(args[0]);
      case Op::Cos:
        return -(sin(args[0]) * self(args[0]));
      case Op::Tan:
        return (one() + pow(x, 2)) * self(args[0]);
      case Op::Sqrt:
        return self(args[0]) / (Expr::constant(2.0) * x);
      case Op::Atan2: {
        const Expr& y = args[0];
        const Expr& xx = args[1];
        Expr dy = self(y);
        Expr dx = self(xx);
        Expr num = xx * dy - y * dx;
        if (num.is_constant(0.0)) return zero();
        return num / (pow(xx, 2) + pow(y, 2));
      }
    }
    return zero();
  });
  return d(e);
}

Expr substitute(const Expr& e, const Substitution& map) {
  if (map.empty()) return e;
  std::uint64_t mask = 0;
  for (const auto& [name, _] : map) mask |= name_bit(name);
  auto s = make_rewriter([&](auto& self, const Expr& x) -> Expr {
    if ((x.var_mask() & mask) == 0) return x;
    if (x.op() == Op::Var) {
      auto it = map.find(x.name());
      return it == map.end() ? x : it->second;
    }
    std::vector<Expr> a;
    a.reserve(x.args().size());
    for (const auto& c : x.args()) a.push_back(self(c));
    return rebuild(x, std::move(a));
  });
  return s(e);
}

Expr simplify(const Expr& e) {
  auto s = make_rewriter([&](auto& self, const Expr& x) -> Expr {
    if (x.op() == Op::Const || x.op() == Op::Var) return x;
    std::vector<Expr> a;
    a.reserve(x.args().size());
    for (const auto& c : x.args()) a.push_back(self(c));
    return rebuild(x, std::move(a));
  });
  return s(e);
}

Expr normalize(const Expr& e) {
  auto s = make_rewriter([&](auto& self, const Expr& x) -> Expr {
    switch (x.op()) {
      case Op::Const:
      case Op::Var:
        return x;
      case Op::Neg: {
        Expr a = self(x.arg(0));
        if (a.is_constant()) return Expr::constant(-a.value());
        return Expr::raw(Op::Neg, {a});
      }
      case Op::Add:
      case Op::Mul: {
        std::vector<Expr> out;
        for (const auto& c : x.args()) {
          Expr a = self(c);
          if (a.op() == x.op()) {
            for (const auto& s2 : a.args()) out.push_back(s2);
          } else {
            out.push_back(a);
          }
        }
        return Expr::raw(x.op(), std::move(out));
      }
      case Op::Pow:
        return Expr::raw_pow(self(x.arg(0)), x.exponent());
      default: {
        std::vector<Expr> a;
        for (const auto& c : x.args()) a.push_back(self(c));
        return Expr::raw(x.op(), std::move(a));
      }
    }
  });
  return s(e);
}

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  std::unordered_set<const Node*> seen;
  std::vector<const Expr*> stack{&e};
  while (!stack.empty()) {
    const Expr* x = stack.back();
    stack.pop_back();
    if (!seen.insert(x->id()).second) continue;
    if (x->op() == Op::Var) out.insert(x->name());
    for (const auto& a : x->args()) stack.push_back(&a);
  }
  return out;
}

bool depends_on(const Expr& e, std::string_view var) {
  const std::string v(var);
  if ((e.var_mask() & name_bit(v)) == 0) return false;
  return free_variables(e).count(v) > 0;
}

std::size_t node_count(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::vector<const Expr*> stack{&e};
  while (!stack.empty()) {
    const Expr* x = stack.back();
    stack.pop_back();
    if (!seen.insert(x->id()).second) continue;
    for (const auto& a : x->args()) stack.push_back(&a);
  }
  return seen.size();
}

double eval(const Expr& e, const VarBinding& binding) {
  auto vars = free_variables(e);
  std::vector<std::string> names(vars.begin(), vars.end());
  std::vector<double> values;
  values.reserve(names.size());
  for (const auto& n : names) {
    auto it = binding.find(n);
    if (it == binding.end()) throw EvalError("unbound variable '" + n + "'");
    values.push_back(it->second);
  }
  Program prog(std::span<const Expr>(&e, 1), names);
  double out = 0.0;
  prog.run(values, std::span<double>(&out, 1));
  return out;
}

}  // namespace qslin
