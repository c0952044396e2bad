#pragma once

// Quasi-static feedback u~ = alpha(q~, v~, w, w_[1], ...) realizing the
// integrator chains y^j_[kappa^j] = w^j.
//
// The law substitutes y^j_[kappa^j + b] = w^j_[b] into the generalized flat
// map, solves (F_q~, F_v~) = (q~, v~) for the remaining jets
// psi = y_[0, kappa - 1] by Newton's method, and evaluates F_u~ there.

#include <optional>
#include <string>
#include <vector>

#include "qslin/flatness.hpp"

namespace qslin {

struct FeedbackSettings {
  double tol = 1e-10;
  int max_iter = 50;
  int max_halvings = 30;
};

/// Caller-owned warm-start state; one per trajectory or thread.
struct FeedbackWorkspace {
  std::optional<Vec> psi;
  int last_iterations = 0;
  double last_residual = 0.0;
};

struct PsiSolution {
  Vec psi;  // values of unknowns(), in order
  int iterations = 0;
  double residual = 0.0;
  double sigma_min = 0.0;
};

class FeedbackLaw {
 public:
  FeedbackLaw(FlatMap generalized, MultiIndex kappa, FeedbackSettings settings = {});

  const FlatMap& flat_map() const noexcept { return fm_; }
  const MultiIndex& kappa() const noexcept { return kappa_; }
  const FeedbackSettings& settings() const noexcept { return settings_; }
  std::size_t state_dim() const noexcept { return 2 * fm_.rows(); }

  /// Jet names y_[0, kappa - 1] solved for.
  const std::vector<std::string>& unknowns() const noexcept { return unknowns_; }
  /// Number of w^j slots read by the law: highest b with w^j_[b] used, plus one.
  const MultiIndex& w_slots() const noexcept { return w_slots_; }
  /// Substituted maps over (unknowns, w-jets).
  const std::vector<Expr>& state_map() const noexcept { return state_map_; }
  const std::vector<Expr>& input_map() const noexcept { return input_map_; }

  /// w^j_[b] = y^j_[kappa^j + b] of a full jet point.
  JetPoint w_from_jets(const JetPoint& y) const;
  /// Full jets from psi and w: y^j_[a] = psi for a < kappa^j, w^j_[a - kappa^j] above.
  JetPoint assemble_jets(const Vec& psi, const JetPoint& w) const;
  Vec psi_from_jets(const JetPoint& y) const;

  /// Throws NumericError when Newton fails or the Jacobian is singular.
  PsiSolution solve_psi(const Vec& state, const JetPoint& w, const Vec& guess) const;
  PsiSolution solve_psi(const Vec& state, const JetPoint& w, FeedbackWorkspace& ws) const;

  Vec feedback(const Vec& state, const JetPoint& w, FeedbackWorkspace& ws) const;
  /// F_u~ at given psi, without solving.
  Vec input_at(const Vec& psi, const JetPoint& w) const;

  /// Residual [F_q~; F_v~](psi, w) - state and its Jacobian in psi.
  Vec residual(const Vec& psi, const JetPoint& w, const Vec& state) const;
  Mat jacobian(const Vec& psi, const JetPoint& w) const;
  /// d u~ / d psi.
  Mat input_jacobian(const Vec& psi, const JetPoint& w) const;

 private:
  std::vector<double> inputs(const Vec& psi, const JetPoint& w) const;

  FlatMap fm_;
  MultiIndex kappa_;
  FeedbackSettings settings_;
  std::vector<std::string> unknowns_;
  MultiIndex w_slots_;
  std::vector<Expr> state_map_, input_map_;
  Program state_prog_, input_prog_;
  MatrixProgram state_jac_, input_jac_;
};

struct DependenceReport {
  std::vector<std::string> state_names;
  /// Largest |d u~_i / d x| over the sample points, per state component.
  std::vector<double> sensitivity;
  std::vector<bool> depends;
  MultiIndex w_slots;
  double threshold = 1e-9;
  int points = 0;
};

/// Sensitivities via the implicit function theorem:
/// du~/dx = (dF_u~/dpsi) (d(F_q~; F_v~)/dpsi)^-1, at random jets near y_s.
DependenceReport dependence_report(const FeedbackLaw& law, const JetPoint& y_s, int points = 20,
                                   double spread = 0.3, std::uint64_t seed = 3, double threshold = 1e-9);

}  // namespace qslin
