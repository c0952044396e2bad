#pragma once

// Multi-indices and jet coordinates of the flat output.
//
// Jet coordinates are plain expression variables named "y{j}_d{a}" for the
// a-th time derivative of output j (1-based), with "y{j}" for a = 0. The same
// naming scheme with another prefix ("w{j}_d{b}") carries the new inputs of
// a feedback law. All indices in this API are 0-based; only names are 1-based.

#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qslin/expr.hpp"

namespace qslin {

inline constexpr int kDefaultMaxOrder = 6;

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t m, int fill = 0) : a_(m, fill) {}
  MultiIndex(std::initializer_list<int> a) : a_(a) {}
  explicit MultiIndex(std::vector<int> a) : a_(std::move(a)) {}

  std::size_t size() const noexcept { return a_.size(); }
  int operator[](std::size_t j) const { return a_[j]; }
  int& operator[](std::size_t j) { return a_[j]; }
  const std::vector<int>& values() const noexcept { return a_; }

  /// The length #A = sum of components.
  int sum() const;
  int max() const;
  bool nonnegative() const;

  /// Componentwise A <= B.
  bool leq(const MultiIndex& other) const;

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b);
  /// May produce negative components; ranges built from them are empty.
  friend MultiIndex operator-(const MultiIndex& a, const MultiIndex& b);
  friend MultiIndex operator+(const MultiIndex& a, int c);
  friend MultiIndex operator-(const MultiIndex& a, int c);
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

  /// "(2,2,2)"
  std::string str() const;
  static MultiIndex parse(std::string_view text);

 private:
  std::vector<int> a_;
};

struct JetVar {
  std::size_t output = 0;  // 0-based
  int order = 0;
  friend bool operator==(const JetVar&, const JetVar&) = default;
};

std::string jet_name(std::size_t output, int order, std::string_view prefix = "y");
std::optional<JetVar> parse_jet_name(std::string_view name, std::string_view prefix = "y");

/// Names y^j_[lo], ..., y^j_[hi]; empty when lo > hi.
std::vector<std::string> jet_range(std::size_t output, int lo, int hi, std::string_view prefix = "y");

/// Names of y_[lo_j, hi_j] for all outputs, output-major.
std::vector<std::string> jet_range(const MultiIndex& lo, const MultiIndex& hi, std::string_view prefix = "y");

/// All names y^j_[0..max_order], output-major.
std::vector<std::string> jet_names(std::size_t m, int max_order, std::string_view prefix = "y");

/// Values y^j_[a] for j < m and a <= max_order.
class JetPoint {
 public:
  JetPoint() = default;
  JetPoint(std::size_t m, int max_order);

  std::size_t outputs() const noexcept { return m_; }
  int max_order() const noexcept { return l_; }

  double operator()(std::size_t j, int order) const { return v_[j * (l_ + 1) + order]; }
  double& operator()(std::size_t j, int order) { return v_[j * (l_ + 1) + order]; }

  /// Output-major storage, in the order of jet_names(outputs(), max_order()).
  std::span<const double> data() const noexcept { return v_; }
  std::span<double> data() noexcept { return v_; }

  bool is_equilibrium(double tol = 0.0) const;
  /// Base values y^j_[0].
  std::vector<double> base() const;

  /// Adds every coordinate to `binding` under its jet name.
  void bind(VarBinding& binding, std::string_view prefix = "y") const;
  VarBinding binding(std::string_view prefix = "y") const;

 private:
  std::size_t m_ = 0;
  int l_ = 0;
  std::vector<double> v_;
};

JetPoint make_equilibrium(std::span<const double> y0, int max_order = kDefaultMaxOrder);

/// Total time derivative: sum over jet variables x = y^j_[a] in `e` of
/// y^j_[a+1] * de/dx. Variables outside the listed jet families are treated
/// as constants. Throws ValidationError if a shifted order exceeds order_cap.
Expr total_derivative(const Expr& e, int order_cap = kDefaultMaxOrder,
                      std::span<const std::string> families = {});
Expr total_derivative(const Expr& e, int times, int order_cap, std::span<const std::string> families = {});

/// Highest order of each output appearing in `e`; -1 if absent.
MultiIndex highest_orders(const Expr& e, std::size_t m, std::string_view prefix = "y");
MultiIndex highest_orders(std::span<const Expr> es, std::size_t m, std::string_view prefix = "y");

}  // namespace qslin
