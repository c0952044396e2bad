#pragma once

// Flat parameterizations (q, v, u) = (F_q, F_v, F_u)(y-jets), their
// restriction to a generalized system, equilibrium Jacobians and the
// admissible integrator-chain lengths of quasi-static feedback.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qslin/jets.hpp"
#include "qslin/linalg.hpp"
#include "qslin/mechanics.hpp"

namespace qslin {

struct FlatMap {
  std::size_t outputs = 0;  // m flat outputs
  int max_order = kDefaultMaxOrder;
  std::vector<std::string> q_names, v_names, u_names;
  std::vector<Expr> Fq, Fv, Fu;
  MultiIndex R, S;
  bool generalized = false;

  std::size_t rows() const noexcept { return Fq.size(); }
};

struct FlatMapOptions {
  int max_order = kDefaultMaxOrder;
  int residual_points = 50;
  double residual_tol = 1e-8;
  /// Jet coordinates are drawn uniformly from [-jet_box, jet_box].
  double jet_box = 1.0;
  std::uint64_t seed = 1;
  /// Enforce 2 <= R <= 4 with some r^j = 4 when m = p - 1.
  bool check_order_bounds = true;
};

struct FlatMapCertificate {
  double max_residual = 0.0;   // scaled dynamics residual
  double max_output_error = 0.0;  // |phi(F_q) - y|
  int points = 0;
  std::vector<std::size_t> force_rows;  // rows of G used to solve for F_u
};

/// Derives F_v = TD(F_q) and F_u from the equations of motion, then certifies
/// the parameterization at random jets. Throws MathConditionError when the
/// parameterization does not satisfy the dynamics or the order bounds.
FlatMap build_flat_map(const ClassicalStateForm& csf, const std::vector<Expr>& phi, const std::vector<Expr>& Fq,
                       const FlatMapOptions& opt = {}, FlatMapCertificate* certificate = nullptr);

/// F_q~ and F_v~ keep the unpromoted rows; F_u~ is the promoted coordinates'
/// rows of F_q followed by the remaining rows of F_u.
FlatMap restrict_to_generalized(const FlatMap& fm, const GeneralizedSystem& gen);

/// Orders scanned from expressions: R = max(ord F_q + 2, ord F_v + 1), S = ord F_u.
MultiIndex scan_R(const FlatMap& fm);
MultiIndex scan_S(const FlatMap& fm);

/// Evaluates a list of jet expressions and their partial derivatives with
/// respect to chosen jet coordinates.
class JetJacobian {
 public:
  JetJacobian(const std::vector<Expr>& rows, const std::vector<std::string>& wrt, std::size_t m, int max_order);
  Mat operator()(const JetPoint& y) const;
  Vec values(const JetPoint& y) const;

 private:
  std::size_t rows_, cols_;
  Program jac_, val_;
};

struct EquilibriumJacobianReport {
  JetPoint y_s;
  /// Q[a] = d F_q / d y_[a], V[a] = d F_v / d y_[a], a = 0..3.
  std::vector<Mat> Q, V;
  int rank_Q0 = 0;
  int rank_Q2 = 0;
  /// Largest entry of Q1 and Q3, which vanish at equilibria.
  double max_zero_block = 0.0;
  /// Largest of |V1 - Q0| and |V3 - Q2|.
  double max_velocity_mismatch = 0.0;
  /// Largest entry of V0 and V2.
  double max_velocity_zero_block = 0.0;
};

EquilibriumJacobianReport equilibrium_jacobian(const FlatMap& fm, const JetPoint& y_s);

struct StructureCheck {
  bool pass = false;
  std::vector<std::string> diagnostics;
};

/// Structure of the classical equilibrium Jacobian: rank Q0 = number of flat
/// outputs, rank Q2 <= 1, zero blocks and velocity-block identities to `tol`.
StructureCheck verify_equilibrium_structure(const EquilibriumJacobianReport& report, double tol = 1e-9);

struct KappaCandidate {
  MultiIndex kappa;
  enum class Case { I, II };
  Case case_tag = Case::I;
  /// Flat outputs whose value columns carry the rank, 0-based.
  std::vector<std::size_t> subset;
  /// Case ii: the output whose second-derivative column completes the rank.
  std::optional<std::size_t> column;
  /// Smallest singular value of the certifying matrix at y_s.
  double margin = 0.0;
  /// Smallest singular value of the full regularity matrix at y_s.
  double sigma_min = 0.0;

  std::string case_name() const { return case_tag == Case::I ? "i" : "ii"; }
};

struct KappaOptions {
  double rank_tol = kRankTolerance;
};

std::vector<KappaCandidate> enumerate_kappa(const FlatMap& fm, const JetPoint& y_s, const KappaOptions& opt = {});

/// Columns y^j_[0, kappa^j - 1] in output-major order.
std::vector<std::string> regularity_columns(const MultiIndex& kappa);

/// The 2n x 2n matrix d(F_q; F_v) / d y_[0, kappa - 1].
Mat regularity_matrix(const FlatMap& fm, const MultiIndex& kappa, const JetPoint& y);

struct RegularityReport {
  MultiIndex kappa;
  double sigma_min_at_equilibrium = 0.0;
  double sigma_min_over_ball = 0.0;
  int rank_at_equilibrium = 0;
  int samples = 0;
  bool regular = false;
};

struct RegularityOptions {
  int samples = 20;
  double radius = 1e-2;
  std::uint64_t seed = 1;
  double rank_tol = kRankTolerance;
};

RegularityReport check_regularity(const FlatMap& fm, const MultiIndex& kappa, const JetPoint& y_s,
                                  const RegularityOptions& opt = {});

/// Random point in the ball of `radius` around `center` over all jet coordinates.
JetPoint sample_ball(const JetPoint& center, double radius, std::mt19937_64& rng);

}  // namespace qslin
