#pragma once

// Lagrangian control systems M(q) q'' + c(q, v) = G(q) u and the
// generalized systems obtained by treating some coordinates as inputs.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qslin/jets.hpp"
#include "qslin/linalg.hpp"

namespace qslin {

struct LagrangianSystem {
  std::vector<std::string> q, v, u;
  ExprMatrix metric;        // p x p, in q
  Expr potential;           // V(q)
  ExprMatrix input_matrix;  // p x m, in q

  std::size_t p() const noexcept { return q.size(); }
  std::size_t m() const noexcept { return u.size(); }

  /// Acceleration variable of coordinate i: "<q_i>_d2".
  std::string accel(std::size_t i) const { return q[i] + "_d2"; }

  /// Dimensions, name uniqueness, variable scoping and metric symmetry.
  /// Errors name the offending entry with 1-based indices, e.g. "metric[1,3]".
  void validate() const;
};

/// The implicit equations of motion with compiled numeric evaluators.
class ClassicalStateForm {
 public:
  explicit ClassicalStateForm(LagrangianSystem sys);

  const LagrangianSystem& system() const noexcept { return sys_; }
  const ExprMatrix& mass() const noexcept { return sys_.metric; }
  /// c_i(q, v): Coriolis, centrifugal and gravity terms.
  const std::vector<Expr>& bias() const noexcept { return c_; }
  /// M q'' + c - G u over (q, v, accelerations, u).
  const std::vector<Expr>& residual() const noexcept { return residual_; }

  Mat mass(const Vec& q) const;
  Vec bias(const Vec& q, const Vec& v) const;
  Mat input(const Vec& q) const;

  /// q'' from M q'' = G u - c. Throws NumericError if M is not positive definite.
  Vec rhs(const Vec& q, const Vec& v, const Vec& u) const;
  Vec implicit_residual(const Vec& q, const Vec& v, const Vec& a, const Vec& u) const;

  double energy(const Vec& q, const Vec& v) const;

 private:
  LagrangianSystem sys_;
  std::vector<Expr> c_;
  std::vector<Expr> residual_;
  MatrixProgram mass_prog_, input_prog_;
  Program bias_prog_, potential_prog_;
};

ClassicalStateForm euler_lagrange(const LagrangianSystem& sys);

/// Replaces input `input` by coordinate `coordinate` (both 0-based).
struct Promotion {
  std::size_t input;
  std::size_t coordinate;
};

/// v_dot = f~(q~, v~, u~ and derivatives of the promoted coordinates).
///
/// u~ lists the promoted coordinates first, then the remaining forces. A
/// promoted coordinate named "phi" enters through "phi", "phi_d1", "phi_d2".
class GeneralizedSystem {
 public:
  GeneralizedSystem(const ClassicalStateForm& csf, std::vector<Promotion> selection);

  std::size_t k() const noexcept { return selection_.size(); }
  const std::vector<Promotion>& selection() const noexcept { return selection_; }
  const ClassicalStateForm& classical() const noexcept { return csf_; }

  const std::vector<std::size_t>& kept() const noexcept { return kept_; }
  const std::vector<std::size_t>& remaining_inputs() const noexcept { return remaining_; }
  const std::vector<std::string>& q() const noexcept { return q_; }
  const std::vector<std::string>& v() const noexcept { return v_; }
  const std::vector<std::string>& u() const noexcept { return u_; }
  /// Arguments of f~ beyond (q~, v~): each promoted coordinate with its first
  /// two derivatives, then the remaining forces.
  const std::vector<std::string>& input_args() const noexcept { return input_args_; }
  const MultiIndex& B() const noexcept { return B_; }

  /// f~ rows, one per kept coordinate.
  const std::vector<Expr>& rhs() const noexcept { return rhs_; }
  /// The forces eliminated by the promotion (the selected inputs).
  const std::vector<Expr>& eliminated_forces() const noexcept { return forces_; }
  /// [M(:, kept) | -G(:, selected)], the matrix inverted by the promotion.
  const ExprMatrix& mixed_matrix() const noexcept { return mixed_; }

  /// All variables of f~ in evaluation order: q~, v~, input_args.
  const std::vector<std::string>& arguments() const noexcept { return args_; }

  Vec rhs(std::span<const double> args) const;
  Vec eliminated_forces(std::span<const double> args) const;
  double mixed_condition(std::span<const double> args) const;

 private:
  ClassicalStateForm csf_;
  std::vector<Promotion> selection_;
  std::vector<std::size_t> kept_, remaining_;
  std::vector<std::string> q_, v_, u_, input_args_, args_;
  MultiIndex B_;
  std::vector<Expr> rhs_, forces_;
  ExprMatrix mixed_;
  Program rhs_prog_, forces_prog_;
  MatrixProgram mixed_prog_;
};

GeneralizedSystem promote(const ClassicalStateForm& csf, std::vector<Promotion> selection);

struct Equilibrium {
  Vec q, u;
  double residual = 0.0;
  int iterations = 0;
};

/// Newton solve of c(q, 0) = G(q) u near a guess. `fixed` maps coordinate
/// or input names to values held constant; with m entries fixed the system is
/// square, otherwise each step is the minimum-norm correction.
Equilibrium find_equilibrium(const ClassicalStateForm& csf, const Vec& q_guess, const Vec& u_guess,
                             const std::map<std::string, double>& fixed = {}, double tol = 1e-11,
                             int max_iter = 50);

}  // namespace qslin
