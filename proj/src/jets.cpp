#include "qslin/jets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "qslin/error.hpp"

namespace qslin {

int MultiIndex::sum() const { return std::accumulate(a_.begin(), a_.end(), 0); }

int MultiIndex::max() const { return a_.empty() ? 0 : *std::max_element(a_.begin(), a_.end()); }

bool MultiIndex::nonnegative() const {
  return std::all_of(a_.begin(), a_.end(), [](int x) { return x >= 0; });
}

bool MultiIndex::leq(const MultiIndex& other) const {
  if (size() != other.size()) throw ValidationError("multi-index length mismatch");
  for (std::size_t j = 0; j < size(); ++j) {
    if (a_[j] > other.a_[j]) return false;
  }
  return true;
}

MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size()) throw ValidationError("multi-index length mismatch");
  MultiIndex r(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) r[j] = a[j] + b[j];
  return r;
}

MultiIndex operator-(const MultiIndex& a, const MultiIndex& b) {
  if (a.size() != b.size()) throw ValidationError("multi-index length mismatch");
  MultiIndex r(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) r[j] = a[j] - b[j];
  return r;
}

MultiIndex operator+(const MultiIndex& a, int c) {
  MultiIndex r = a;
  for (std::size_t j = 0; j < a.size(); ++j) r[j] += c;
  return r;
}

MultiIndex operator-(const MultiIndex& a, int c) { return a + (-c); }

std::string MultiIndex::str() const {
  std::string s = "(";
  for (std::size_t j = 0; j < a_.size(); ++j) {
    if (j) s += ',';
    s += std::to_string(a_[j]);
  }
  return s + ")";
}

MultiIndex MultiIndex::parse(std::string_view text) {
  std::vector<int> out;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '(' || text[i] == ')')) ++i;
  };
  skip();
  while (i < text.size()) {
    int v = 0;
    auto res = std::from_chars(text.data() + i, text.data() + text.size(), v);
    if (res.ec != std::errc()) throw ValidationError("malformed multi-index '" + std::string(text) + "'");
    out.push_back(v);
    i = static_cast<std::size_t>(res.ptr - text.data());
    skip();
    if (i < text.size()) {
      if (text[i] != ',') throw ValidationError("malformed multi-index '" + std::string(text) + "'");
      ++i;
      skip();
    }
  }
  if (out.empty()) throw ValidationError("empty multi-index");
  return MultiIndex(std::move(out));
}

std::string jet_name(std::size_t output, int order, std::string_view prefix) {
  std::string s(prefix);
  s += std::to_string(output + 1);
  if (order > 0) {
    s += "_d";
    s += std::to_string(order);
  }
  return s;
}

std::optional<JetVar> parse_jet_name(std::string_view name, std::string_view prefix) {
  if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return std::nullopt;
  const char* p = name.data() + prefix.size();
  const char* end = name.data() + name.size();
  if (*p == '0') return std::nullopt;
  unsigned long j = 0;
  auto r1 = std::from_chars(p, end, j);
  if (r1.ec != std::errc() || j == 0) return std::nullopt;
  if (r1.ptr == end) return JetVar{j - 1, 0};
  if (end - r1.ptr < 3 || r1.ptr[0] != '_' || r1.ptr[1] != 'd') return std::nullopt;
  const char* q = r1.ptr + 2;
  if (*q == '0') return std::nullopt;
  int a = 0;
  auto r2 = std::from_chars(q, end, a);
  if (r2.ec != std::errc() || r2.ptr != end || a <= 0) return std::nullopt;
  return JetVar{j - 1, a};
}

std::vector<std::string> jet_range(std::size_t output, int lo, int hi, std::string_view prefix) {
  std::vector<std::string> out;
  for (int a = std::max(lo, 0); a <= hi; ++a) out.push_back(jet_name(output, a, prefix));
  return out;
}

std::vector<std::string> jet_range(const MultiIndex& lo, const MultiIndex& hi, std::string_view prefix) {
  if (lo.size() != hi.size()) throw ValidationError("multi-index length mismatch");
  std::vector<std::string> out;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    auto r = jet_range(j, lo[j], hi[j], prefix);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<std::string> jet_names(std::size_t m, int max_order, std::string_view prefix) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < m; ++j) {
    for (int a = 0; a <= max_order; ++a) out.push_back(jet_name(j, a, prefix));
  }
  return out;
}

JetPoint::JetPoint(std::size_t m, int max_order)
    : m_(m), l_(max_order), v_(m * static_cast<std::size_t>(max_order + 1), 0.0) {
  if (max_order < 0) throw ValidationError("negative jet order");
}

bool JetPoint::is_equilibrium(double tol) const {
  for (std::size_t j = 0; j < m_; ++j) {
    for (int a = 1; a <= l_; ++a) {
      if (std::abs((*this)(j, a)) > tol) return false;
    }
  }
  return true;
}

std::vector<double> JetPoint::base() const {
  std::vector<double> y(m_);
  for (std::size_t j = 0; j < m_; ++j) y[j] = (*this)(j, 0);
  return y;
}

void JetPoint::bind(VarBinding& binding, std::string_view prefix) const {
  for (std::size_t j = 0; j < m_; ++j) {
    for (int a = 0; a <= l_; ++a) binding[jet_name(j, a, prefix)] = (*this)(j, a);
  }
}

VarBinding JetPoint::binding(std::string_view prefix) const {
  VarBinding b;
  bind(b, prefix);
  return b;
}

JetPoint make_equilibrium(std::span<const double> y0, int max_order) {
  JetPoint p(y0.size(), max_order);
  for (std::size_t j = 0; j < y0.size(); ++j) p(j, 0) = y0[j];
  return p;
}

Expr total_derivative(const Expr& e, int order_cap, std::span<const std::string> families) {
  static const std::string kDefault[] = {"y"};
  if (families.empty()) families = kDefault;
  std::vector<Expr> terms;
  for (const auto& name : free_variables(e)) {
    for (const auto& fam : families) {
      auto jv = parse_jet_name(name, fam);
      if (!jv) continue;
      if (jv->order + 1 > order_cap) {
        throw ValidationError("total derivative of " + name + " exceeds jet order " + std::to_string(order_cap));
      }
      Expr d = diff(e, name);
      if (!d.is_constant(0.0)) terms.push_back(Expr::variable(jet_name(jv->output, jv->order + 1, fam)) * d);
      break;
    }
  }
  return add(std::move(terms));
}

Expr total_derivative(const Expr& e, int times, int order_cap, std::span<const std::string> families) {
  Expr r = e;
  for (int i = 0; i < times; ++i) r = total_derivative(r, order_cap, families);
  return r;
}

MultiIndex highest_orders(const Expr& e, std::size_t m, std::string_view prefix) {
  return highest_orders(std::span<const Expr>(&e, 1), m, prefix);
}

MultiIndex highest_orders(std::span<const Expr> es, std::size_t m, std::string_view prefix) {
  MultiIndex r(m, -1);
  for (const auto& e : es) {
    for (const auto& name : free_variables(e)) {
      auto jv = parse_jet_name(name, prefix);
      if (jv && jv->output < m) r[jv->output] = std::max(r[jv->output], jv->order);
    }
  }
  return r;
}

}  // namespace qslin
