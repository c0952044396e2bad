#pragma once

// Rest-to-rest references, closed-loop simulation of the generalized system
// under quasi-static feedback, the flat-side reference rollout, and
// finite-difference checks of y^j_[kappa^j] = w^j.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qslin/feedback.hpp"
#include "qslin/mechanics.hpp"

namespace qslin {

/// s(tau) = tau^(b+1) sum_{i=0}^{b} C(b+i, i) (1 - tau)^i: s(0) = 0, s(1) = 1 and
/// derivatives 1..b vanish at both ends. Returns d^n s / dtau^n; constant
/// outside [0, 1].
double transition_profile(double tau, int n, int b);

/// Monomial coefficients of s, lowest degree first.
std::vector<double> transition_coefficients(int b);

class ReferenceTrajectory {
 public:
  ReferenceTrajectory() = default;
  ReferenceTrajectory(std::vector<double> start, std::vector<double> end, double T, int boundary_order);

  std::size_t outputs() const noexcept { return start_.size(); }
  double duration() const noexcept { return T_; }
  int boundary_order() const noexcept { return b_; }
  const std::vector<double>& start() const noexcept { return start_; }
  const std::vector<double>& end() const noexcept { return end_; }

  /// d^n y^j / dt^n at t; held constant before 0 and after T.
  double operator()(std::size_t j, int n, double t) const;
  JetPoint jets(double t, int max_order) const;

 private:
  std::vector<double> start_, end_;
  double T_ = 0.0;
  int b_ = 5;
  std::vector<double> coeffs_;
};

/// Checks both endpoints with `gen` and `fm` (a rest point maps to v~ = 0 and
/// f~ = 0) and returns the polynomial transition. Throws MathConditionError
/// for a non-equilibrium endpoint.
ReferenceTrajectory plan_rest_to_rest(const GeneralizedSystem& gen, const FlatMap& fm, std::vector<double> start,
                                      std::vector<double> end, double T, int boundary_order = 5,
                                      double tol = 1e-9);

struct SimOptions {
  double dt = 1e-3;
  double T = 5.0;
  /// How the promoted-input derivatives reach f~. "analytic": total
  /// derivatives of F_u~ on the solved jets. "numeric": 5-point differences of
  /// F_u~ along the Taylor curve of the solved jets, step dt.
  std::string strategy = "analytic";
  /// A psi step faster than branch_factor * max(1, fastest rate so far) aborts.
  double branch_factor = 50.0;
};

struct Trajectory {
  std::vector<std::string> state_names, input_names, output_names;
  std::size_t promoted = 0;  // leading entries of u~ that are coordinates
  std::vector<double> t;
  std::vector<Vec> x;                   // (q~, v~)
  std::vector<Vec> u, u_d1, u_d2;       // u~ and derivatives of the promoted entries
  std::vector<Vec> y;                   // flat output phi(q)
  std::vector<int> iterations;          // Newton iterations at the step start
  std::vector<double> solve_residual;   // Newton residual at the step start
  std::vector<double> mixed_condition;  // condition number of the promotion solve
  std::vector<double> dynamics_residual;  // rollout only: |d v~/dt - f~|

  std::size_t size() const noexcept { return t.size(); }
};

/// Evaluates the generalized dynamics and the flat output of a system.
class GeneralizedPlant {
 public:
  GeneralizedPlant(const GeneralizedSystem& gen, std::vector<Expr> phi);

  const GeneralizedSystem& system() const noexcept { return gen_; }
  std::size_t state_dim() const noexcept { return 2 * gen_.q().size(); }
  std::size_t input_dim() const noexcept { return gen_.u().size(); }

  /// Arguments of f~ from state, inputs and promoted-input derivatives.
  std::vector<double> arguments(const Vec& x, const Vec& u, const Vec& u_d1, const Vec& u_d2) const;
  /// x_dot = (v~, f~).
  Vec derivative(const Vec& x, const Vec& u, const Vec& u_d1, const Vec& u_d2) const;
  /// Classical configuration, velocity and forces.
  Vec classical_q(const Vec& x, const Vec& u) const;
  Vec classical_v(const Vec& x, const Vec& u_d1) const;
  Vec classical_u(const Vec& x, const Vec& u, const Vec& u_d1, const Vec& u_d2) const;
  Vec outputs(const Vec& x, const Vec& u) const;

 private:
  GeneralizedSystem gen_;
  Program phi_prog_;
};

Trajectory simulate_closed_loop(const GeneralizedPlant& plant, const FeedbackLaw& law, const ReferenceTrajectory& ref,
                                const Vec& x0, const SimOptions& opt);

/// The reference realized exactly on the flat side, mapped through
/// (F_q~, F_v~, F_u~); fills dynamics_residual. Throws NumericError with the
/// time of failure if the flat map is singular along the path.
Trajectory flat_side_rollout(const GeneralizedPlant& plant, const FlatMap& fm, const ReferenceTrajectory& ref,
                             const SimOptions& opt);

/// Finite-difference weights for the n-th derivative at `at` over `nodes`.
std::vector<double> fd_weights(int n, std::span<const double> nodes, double at);

struct LinearizationReport {
  MultiIndex kappa;
  std::vector<double> relative_error, absolute_error, scale;
  /// Grid stride of the stencils and samples skipped at each end.
  int stride = 1;
  int clipped = 0;
  double max_relative_error = 0.0;
};

/// Compares the kappa^j-th numerical derivative of y^j(t) with
/// w^j(t) = ref^(kappa^j)(t) on the interior of the grid. Stencils are
/// central with accuracy order kappa^j + 2 on every `stride`-th sample.
LinearizationReport verify_linearization(const Trajectory& traj, const MultiIndex& kappa,
                                         const ReferenceTrajectory& ref, double stencil_spacing = 1e-2);

/// Largest absolute state difference over the common grid.
double max_state_difference(const Trajectory& a, const Trajectory& b);

struct PowerBalance {
  double energy_change = 0.0;
  double work = 0.0;            // integral of v . G u
  double work_magnitude = 0.0;  // integral of |v . G u|
  double relative_error = 0.0;  // |energy_change - work| / max(work_magnitude, energy scale)
};

PowerBalance power_balance(const GeneralizedPlant& plant, const Trajectory& traj);

void write_csv(const Trajectory& traj, const std::filesystem::path& path);
/// gnuplot commands plotting states, inputs and outputs of a CSV.
void write_plot_script(const Trajectory& traj, const std::string& csv_name, const std::filesystem::path& path);

}  // namespace qslin
