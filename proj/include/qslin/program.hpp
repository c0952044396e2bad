#pragma once

// Straight-line evaluation tapes compiled from expression DAGs.
//
// A Program evaluates a fixed list of expressions over a fixed ordering of
// input variables. Structurally identical sub-expressions are evaluated once,
// which matters for the flat maps: their higher total derivatives repeat the
// same trigonometric and square-root kernels many times.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qslin/expr.hpp"

namespace qslin {

class Program {
 public:
  Program() = default;
  /// Throws EvalError if an expression uses a variable missing from `inputs`.
  Program(std::span<const Expr> outputs, const std::vector<std::string>& inputs);

  std::size_t input_count() const noexcept { return input_count_; }
  std::size_t output_count() const noexcept { return outputs_.size(); }
  std::size_t instruction_count() const noexcept { return code_.size(); }

  /// Throws EvalError on division by zero or the square root of a negative.
  void run(std::span<const double> inputs, std::span<double> outputs) const;
  std::vector<double> run(std::span<const double> inputs) const;

 private:
  struct Instr {
    Op op;
    int exponent;
    std::uint32_t first;  // index into args_, or input slot for Var
    std::uint32_t count;
    double value;
  };

  std::size_t input_count_ = 0;
  std::vector<Instr> code_;
  std::vector<std::uint32_t> args_;
  std::vector<std::uint32_t> outputs_;
};

double ipow(double base, int exponent);

}  // namespace qslin
