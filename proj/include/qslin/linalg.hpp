#pragma once

// Small dense linear algebra: numeric rank decisions and symbolic solves.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qslin/expr.hpp"
#include "qslin/program.hpp"

namespace qslin {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kRankTolerance = 1e-8;

struct RankInfo {
  int rank = 0;
  double sigma_max = 0.0;
  /// Smallest singular value (0 for an empty or wide-and-deficient matrix).
  double sigma_min = 0.0;
  /// Smallest singular value that still counts toward the rank.
  double margin = 0.0;
  Vec singular_values;
};

/// Rank with threshold rel_tol * sigma_max.
RankInfo rank_info(const Mat& a, double rel_tol = kRankTolerance);
double condition_number(const Mat& a);

/// Row-major matrix of expressions.
using ExprMatrix = std::vector<std::vector<Expr>>;

ExprMatrix make_matrix(std::size_t rows, std::size_t cols);
ExprMatrix columns(const ExprMatrix& a, const std::vector<std::size_t>& cols);
ExprMatrix rows(const ExprMatrix& a, const std::vector<std::size_t>& rows);

/// Determinant by Laplace expansion with memoized minors.
Expr determinant(const ExprMatrix& a);

/// Cramer's rule: x = adj(A) b / det(A) for square A.
std::vector<Expr> cramer_solve(const ExprMatrix& a, const std::vector<Expr>& b);

/// Compiled numeric evaluation of a fixed expression matrix.
class MatrixProgram {
 public:
  MatrixProgram() = default;
  MatrixProgram(const ExprMatrix& a, const std::vector<std::string>& inputs);
  Mat operator()(std::span<const double> inputs) const;
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Program prog_;
};

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
inline Vec to_eigen(std::span<const double> v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace qslin
