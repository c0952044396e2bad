#include "qslin/linalg.hpp"

#include <map>

#include "qslin/error.hpp"

namespace qslin {

RankInfo rank_info(const Mat& a, double rel_tol) {
  RankInfo info;
  if (a.size() == 0) return info;
  Eigen::JacobiSVD<Mat> svd(a);
  info.singular_values = svd.singularValues();
  const auto& s = info.singular_values;
  info.sigma_max = s(0);
  info.sigma_min = std::min(a.rows(), a.cols()) == s.size() ? s(s.size() - 1) : 0.0;
  const double tol = rel_tol * info.sigma_max;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol && s(i) > 0.0) {
      ++info.rank;
      info.margin = s(i);
    }
  }
  return info;
}

double condition_number(const Mat& a) {
  auto info = rank_info(a, 0.0);
  if (info.sigma_min == 0.0) return std::numeric_limits<double>::infinity();
  return info.sigma_max / info.sigma_min;
}

ExprMatrix make_matrix(std::size_t rows, std::size_t cols) {
  return ExprMatrix(rows, std::vector<Expr>(cols));
}

ExprMatrix columns(const ExprMatrix& a, const std::vector<std::size_t>& cols) {
  ExprMatrix r = make_matrix(a.size(), cols.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) r[i][j] = a[i][cols[j]];
  }
  return r;
}

ExprMatrix rows(const ExprMatrix& a, const std::vector<std::size_t>& rs) {
  ExprMatrix r;
  for (auto i : rs) r.push_back(a[i]);
  return r;
}

namespace {

// Expands along row `row` over the column set `mask`; rows above are used.
Expr minor_det(const ExprMatrix& a, std::size_t row, unsigned mask, std::map<unsigned, Expr>& memo) {
  if (mask == 0) return Expr::constant(1.0);
  auto it = memo.find(mask);
  if (it != memo.end()) return it->second;
  std::vector<Expr> terms;
  int sign = 1;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (!(mask & (1u << c))) continue;
    const Expr& entry = a[row][c];
    if (!entry.is_constant(0.0)) {
      Expr sub = minor_det(a, row + 1, mask & ~(1u << c), memo);
      if (!sub.is_constant(0.0)) {
        Expr t = entry * sub;
        terms.push_back(sign > 0 ? t : -t);
      }
    }
    sign = -sign;
  }
  Expr r = add(std::move(terms));
  memo.emplace(mask, r);
  return r;
}

void require_square(const ExprMatrix& a) {
  for (const auto& row : a) {
    if (row.size() != a.size()) throw ValidationError("matrix is not square");
  }
  if (a.size() > 16) throw ValidationError("symbolic determinant limited to 16x16");
}

}  // namespace

Expr determinant(const ExprMatrix& a) {
  require_square(a);
  std::map<unsigned, Expr> memo;
  return minor_det(a, 0, (1u << a.size()) - 1u, memo);
}

std::vector<Expr> cramer_solve(const ExprMatrix& a, const std::vector<Expr>& b) {
  require_square(a);
  if (b.size() != a.size()) throw ValidationError("right-hand side size mismatch");
  const Expr det = determinant(a);
  if (det.is_constant(0.0)) throw MathConditionError("matrix is structurally singular");
  std::vector<Expr> x;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ExprMatrix ai = a;
    for (std::size_t r = 0; r < a.size(); ++r) ai[r][i] = b[r];
    x.push_back(determinant(ai) / det);
  }
  return x;
}

MatrixProgram::MatrixProgram(const ExprMatrix& a, const std::vector<std::string>& inputs)
    : rows_(a.size()), cols_(a.empty() ? 0 : a[0].size()) {
  std::vector<Expr> flat;
  for (const auto& row : a) flat.insert(flat.end(), row.begin(), row.end());
  prog_ = Program(flat, inputs);
}

Mat MatrixProgram::operator()(std::span<const double> inputs) const {
  // Row-major evaluation into a column-major matrix.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows_, cols_);
  prog_.run(inputs, std::span<double>(m.data(), rows_ * cols_));
  return m;
}

}  // namespace qslin
