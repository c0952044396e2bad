#pragma once

// Random expression generator shared by the property tests. Denominators,
// square-root arguments and tangent arguments are shaped so that evaluation
// stays finite and well conditioned on [-1, 1]^n.

#include <random>
#include <string>
#include <vector>

#include "qslin/expr.hpp"

namespace qslin::testing {

class RandomExpr {
 public:
  RandomExpr(std::vector<std::string> vars, std::uint64_t seed) : vars_(std::move(vars)), rng_(seed) {}

  /// Built from raw nodes: no simplification applied.
  Expr operator()(int depth = 4) { return gen(depth); }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  VarBinding binding(double lo = -1.0, double hi = 1.0) {
    VarBinding b;
    for (const auto& v : vars_) b[v] = uniform(lo, hi);
    return b;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  Expr leaf() {
    switch (pick(4)) {
      case 0: {
        static const double specials[] = {0.0, 1.0, -1.0, 2.0, 0.5};
        return Expr::constant(specials[pick(5)]);
      }
      case 1:
        return Expr::constant(std::round(uniform(-3.0, 3.0) * 100.0) / 100.0);
      default:
        return Expr::variable(vars_[static_cast<std::size_t>(pick(static_cast<int>(vars_.size())))]);
    }
  }

  Expr positive(int depth) {
    // 1 + x^2 style: bounded away from zero.
    return Expr::raw(Op::Add, {Expr::constant(1.0 + uniform(0.0, 1.0)), Expr::raw_pow(gen(depth), 2)});
  }

  Expr gen(int depth) {
    if (depth <= 0) return leaf();
    switch (pick(13)) {
      case 0:
        return leaf();
      case 1:
        return Expr::raw(Op::Neg, {gen(depth - 1)});
      case 2: {
        std::vector<Expr> a;
        const int n = 2 + pick(2);
        for (int i = 0; i < n; ++i) a.push_back(gen(depth - 1));
        return Expr::raw(Op::Add, std::move(a));
      }
      case 3:
        return Expr::raw(Op::Sub, {gen(depth - 1), gen(depth - 1)});
      case 4: {
        std::vector<Expr> a;
        const int n = 2 + pick(2);
        for (int i = 0; i < n; ++i) a.push_back(gen(depth - 1));
        return Expr::raw(Op::Mul, std::move(a));
      }
      case 5:
        return Expr::raw(Op::Div, {gen(depth - 1), positive(depth - 2)});
      case 6:
        return Expr::raw_pow(gen(depth - 1), pick(5) - 1 == 0 ? 2 : pick(3) + 1);
      case 7:
        return Expr::raw_pow(positive(depth - 2), -1 - pick(2));
      case 8:
        return Expr::raw(Op::Sin, {gen(depth - 1)});
      case 9:
        return Expr::raw(Op::Cos, {gen(depth - 1)});
      case 10:
        return Expr::raw(Op::Tan, {Expr::raw(Op::Sin, {gen(depth - 1)})});
      case 11:
        return Expr::raw(Op::Sqrt, {positive(depth - 2)});
      default:
        return Expr::raw(Op::Atan2, {gen(depth - 1), positive(depth - 2)});
    }
  }

  std::vector<std::string> vars_;
  std::mt19937_64 rng_;
};

}  // namespace qslin::testing
