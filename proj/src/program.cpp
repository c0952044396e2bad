#include "qslin/program.hpp"

#include <bit>
#include <cmath>
#include <unordered_map>

#include "qslin/error.hpp"

namespace qslin {

namespace {

struct Key {
  Op op;
  int exponent;
  std::uint64_t bits;
  std::vector<std::uint32_t> args;
  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    std::size_t h = static_cast<std::size_t>(k.op) * 0x100000001b3ULL ^ k.bits;
    h ^= static_cast<std::size_t>(k.exponent) * 0x9e3779b97f4a7c15ULL;
    for (auto a : k.args) h = (h ^ a) * 0x100000001b3ULL;
    return h;
  }
};

}  // namespace

Program::Program(std::span<const Expr> outputs, const std::vector<std::string>& inputs)
    : input_count_(inputs.size()) {
  std::unordered_map<std::string, std::uint32_t> input_index;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    input_index.emplace(inputs[i], static_cast<std::uint32_t>(i));
  }
  std::unordered_map<const Node*, std::uint32_t> by_node;
  std::unordered_map<Key, std::uint32_t, KeyHash> by_key;

  // Iterative post-order walk; flat maps reach a few thousand levels deep
  // after repeated total derivatives of products.
  auto emit = [&](const Expr& root) -> std::uint32_t {
    struct Frame {
      const Expr* e;
      std::size_t next;
    };
    std::vector<Frame> stack{{&root, 0}};
    while (!stack.empty()) {
      Frame& f = stack.back();
      const Expr& e = *f.e;
      if (by_node.count(e.id())) {
        stack.pop_back();
        continue;
      }
      if (f.next < e.args().size()) {
        const Expr* child = &e.args()[f.next++];
        if (!by_node.count(child->id())) stack.push_back({child, 0});
        continue;
      }
      Key key{e.op(), e.exponent(), 0, {}};
      if (e.op() == Op::Const) {
        key.bits = std::bit_cast<std::uint64_t>(e.value());
      } else if (e.op() == Op::Var) {
        auto it = input_index.find(e.name());
        if (it == input_index.end()) throw EvalError("unbound variable '" + e.name() + "'");
        key.bits = it->second;
      }
      key.args.reserve(e.args().size());
      for (const auto& a : e.args()) key.args.push_back(by_node.at(a.id()));
      auto [it, inserted] = by_key.try_emplace(key, static_cast<std::uint32_t>(code_.size()));
      if (inserted) {
        Instr ins{e.op(), e.exponent(), 0, 0, 0.0};
        if (e.op() == Op::Const) {
          ins.value = e.value();
        } else if (e.op() == Op::Var) {
          ins.first = static_cast<std::uint32_t>(key.bits);
        } else {
          ins.first = static_cast<std::uint32_t>(args_.size());
          ins.count = static_cast<std::uint32_t>(key.args.size());
          args_.insert(args_.end(), key.args.begin(), key.args.end());
        }
        code_.push_back(ins);
      }
      by_node.emplace(e.id(), it->second);
      stack.pop_back();
    }
    return by_node.at(root.id());
  };

  for (const auto& e : outputs) outputs_.push_back(emit(e));
}

void Program::run(std::span<const double> inputs, std::span<double> outputs) const {
  if (inputs.size() != input_count_) throw ValidationError("program input size mismatch");
  if (outputs.size() != outputs_.size()) throw ValidationError("program output size mismatch");
  thread_local std::vector<double> slot;
  slot.resize(code_.size());
  const std::uint32_t* A = args_.data();
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    const std::uint32_t* a = A + in.first;
    double r = 0.0;
    switch (in.op) {
      case Op::Const:
        r = in.value;
        break;
      case Op::Var:
        r = inputs[in.first];
        break;
      case Op::Neg:
        r = -slot[a[0]];
        break;
      case Op::Add:
        r = slot[a[0]];
        for (std::uint32_t j = 1; j < in.count; ++j) r += slot[a[j]];
        break;
      case Op::Sub:
        r = slot[a[0]] - slot[a[1]];
        break;
      case Op::Mul:
        r = slot[a[0]];
        for (std::uint32_t j = 1; j < in.count; ++j) r *= slot[a[j]];
        break;
      case Op::Div: {
        const double d = slot[a[1]];
        if (d == 0.0) throw EvalError("division by zero");
        r = slot[a[0]] / d;
        break;
      }
      case Op::Pow:
        r = ipow(slot[a[0]], in.exponent);
        break;
      case Op::Sin:
        r = std::sin(slot[a[0]]);
        break;
      case Op::Cos:
        r = std::cos(slot[a[0]]);
        break;
      case Op::Tan:
        r = std::tan(slot[a[0]]);
        break;
      case Op::Sqrt: {
        const double x = slot[a[0]];
        if (x < 0.0) throw EvalError("square root of negative number");
        r = std::sqrt(x);
        break;
      }
      case Op::Atan2:
        r = std::atan2(slot[a[0]], slot[a[1]]);
        break;
    }
    slot[i] = r;
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) outputs[k] = slot[outputs_[k]];
}

std::vector<double> Program::run(std::span<const double> inputs) const {
  std::vector<double> out(outputs_.size());
  run(inputs, out);
  return out;
}

}  // namespace qslin
