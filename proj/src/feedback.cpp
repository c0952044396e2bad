#include "qslin/feedback.hpp"

#include <cmath>
#include <random>

#include "qslin/error.hpp"

namespace qslin {

FeedbackLaw::FeedbackLaw(FlatMap generalized, MultiIndex kappa, FeedbackSettings settings)
    : fm_(std::move(generalized)), kappa_(std::move(kappa)), settings_(settings) {
  const std::size_t m = fm_.outputs;
  const int target = static_cast<int>(2 * fm_.rows());
  if (kappa_.size() != m || !kappa_.nonnegative() || !kappa_.leq(fm_.R) || kappa_.sum() != target) {
    throw ValidationError("chain lengths " + kappa_.str() + " must satisfy 0 <= kappa <= R = " + fm_.R.str() +
                          " and sum to " + std::to_string(target));
  }
  unknowns_ = regularity_columns(kappa_);

  Substitution to_w;
  for (std::size_t j = 0; j < m; ++j) {
    for (int a = kappa_[j]; a <= fm_.max_order; ++a) {
      to_w[jet_name(j, a)] = Expr::variable(jet_name(j, a - kappa_[j], "w"));
    }
  }
  for (const auto& e : fm_.Fq) state_map_.push_back(substitute(e, to_w));
  for (const auto& e : fm_.Fv) state_map_.push_back(substitute(e, to_w));
  for (const auto& e : fm_.Fu) input_map_.push_back(substitute(e, to_w));

  const MultiIndex ws = highest_orders(state_map_, m, "w");
  const MultiIndex wu = highest_orders(input_map_, m, "w");
  w_slots_ = MultiIndex(m);
  for (std::size_t j = 0; j < m; ++j) w_slots_[j] = std::max(ws[j], wu[j]) + 1;

  std::vector<std::string> names = unknowns_;
  const auto wn = jet_names(m, fm_.max_order, "w");
  names.insert(names.end(), wn.begin(), wn.end());
  ExprMatrix sj = make_matrix(state_map_.size(), unknowns_.size());
  for (std::size_t r = 0; r < state_map_.size(); ++r) {
    for (std::size_t c = 0; c < unknowns_.size(); ++c) sj[r][c] = diff(state_map_[r], unknowns_[c]);
  }
  ExprMatrix uj = make_matrix(input_map_.size(), unknowns_.size());
  for (std::size_t r = 0; r < input_map_.size(); ++r) {
    for (std::size_t c = 0; c < unknowns_.size(); ++c) uj[r][c] = diff(input_map_[r], unknowns_[c]);
  }
  state_prog_ = Program(state_map_, names);
  input_prog_ = Program(input_map_, names);
  state_jac_ = MatrixProgram(sj, names);
  input_jac_ = MatrixProgram(uj, names);
}

std::vector<double> FeedbackLaw::inputs(const Vec& psi, const JetPoint& w) const {
  if (static_cast<std::size_t>(psi.size()) != unknowns_.size()) throw ValidationError("psi has wrong size");
  if (w.outputs() != fm_.outputs || w.max_order() != fm_.max_order) throw ValidationError("w jet has wrong shape");
  std::vector<double> in(psi.data(), psi.data() + psi.size());
  in.insert(in.end(), w.data().begin(), w.data().end());
  return in;
}

JetPoint FeedbackLaw::w_from_jets(const JetPoint& y) const {
  JetPoint w(fm_.outputs, fm_.max_order);
  for (std::size_t j = 0; j < fm_.outputs; ++j) {
    for (int b = 0; b + kappa_[j] <= y.max_order() && b <= fm_.max_order; ++b) w(j, b) = y(j, b + kappa_[j]);
  }
  return w;
}

JetPoint FeedbackLaw::assemble_jets(const Vec& psi, const JetPoint& w) const {
  JetPoint y(fm_.outputs, fm_.max_order);
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < fm_.outputs; ++j) {
    for (int a = 0; a <= fm_.max_order; ++a) y(j, a) = a < kappa_[j] ? psi(k++) : w(j, a - kappa_[j]);
  }
  return y;
}

Vec FeedbackLaw::psi_from_jets(const JetPoint& y) const {
  Vec psi(static_cast<Eigen::Index>(unknowns_.size()));
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < fm_.outputs; ++j) {
    for (int a = 0; a < kappa_[j]; ++a) psi(k++) = y(j, a);
  }
  return psi;
}

Vec FeedbackLaw::residual(const Vec& psi, const JetPoint& w, const Vec& state) const {
  return to_eigen(state_prog_.run(inputs(psi, w))) - state;
}

Mat FeedbackLaw::jacobian(const Vec& psi, const JetPoint& w) const { return state_jac_(inputs(psi, w)); }

Mat FeedbackLaw::input_jacobian(const Vec& psi, const JetPoint& w) const { return input_jac_(inputs(psi, w)); }

Vec FeedbackLaw::input_at(const Vec& psi, const JetPoint& w) const { return to_eigen(input_prog_.run(inputs(psi, w))); }

PsiSolution FeedbackLaw::solve_psi(const Vec& state, const JetPoint& w, const Vec& guess) const {
  if (static_cast<std::size_t>(state.size()) != state_dim()) throw ValidationError("state has wrong size");
  PsiSolution sol;
  sol.psi = guess;
  Vec r = residual(sol.psi, w, state);
  double norm = r.lpNorm<Eigen::Infinity>();
  auto describe = [&](const std::string& what) {
    return what + " after " + std::to_string(sol.iterations) + " iterations (residual " + std::to_string(norm) +
           ", smallest singular value " + std::to_string(sol.sigma_min) + ")";
  };
  for (;;) {
    if (!std::isfinite(norm)) throw NumericError(describe("psi solve produced non-finite values"));
    Mat J = jacobian(sol.psi, w);
    auto info = rank_info(J);
    sol.sigma_min = info.sigma_min;
    if (norm <= settings_.tol) break;
    if (sol.iterations >= settings_.max_iter) throw NumericError(describe("psi solve did not converge"));
    if (info.rank < J.cols()) throw NumericError(describe("psi solve hit a singular Jacobian"));
    const Vec step = J.partialPivLu().solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int h = 0; h <= settings_.max_halvings; ++h, lambda *= 0.5) {
      Vec trial = sol.psi + lambda * step;
      Vec rt;
      try {
        rt = residual(trial, w, state);
      } catch (const EvalError&) {
        continue;
      }
      const double nt = rt.lpNorm<Eigen::Infinity>();
      if (nt < norm) {
        sol.psi = std::move(trial);
        r = std::move(rt);
        norm = nt;
        accepted = true;
        break;
      }
    }
    ++sol.iterations;
    if (!accepted) throw NumericError(describe("psi solve stalled"));
  }
  sol.residual = norm;
  return sol;
}

PsiSolution FeedbackLaw::solve_psi(const Vec& state, const JetPoint& w, FeedbackWorkspace& ws) const {
  Vec guess = ws.psi ? *ws.psi : Vec::Zero(static_cast<Eigen::Index>(unknowns_.size()));
  PsiSolution sol = solve_psi(state, w, guess);
  ws.psi = sol.psi;
  ws.last_iterations = sol.iterations;
  ws.last_residual = sol.residual;
  return sol;
}

Vec FeedbackLaw::feedback(const Vec& state, const JetPoint& w, FeedbackWorkspace& ws) const {
  return input_at(solve_psi(state, w, ws).psi, w);
}

DependenceReport dependence_report(const FeedbackLaw& law, const JetPoint& y_s, int points, double spread,
                                   std::uint64_t seed, double threshold) {
  const auto& fm = law.flat_map();
  DependenceReport rep;
  rep.state_names = fm.q_names;
  rep.state_names.insert(rep.state_names.end(), fm.v_names.begin(), fm.v_names.end());
  rep.sensitivity.assign(rep.state_names.size(), 0.0);
  rep.w_slots = law.w_slots();
  rep.threshold = threshold;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-spread, spread);
  for (int k = 0; k < points; ++k) {
    JetPoint y = y_s;
    for (auto& x : y.data()) x += dist(rng);
    const JetPoint w = law.w_from_jets(y);
    const Vec psi = law.psi_from_jets(y);
    const Mat J = law.jacobian(psi, w);
    if (rank_info(J).rank < J.cols()) throw NumericError("singular Jacobian while probing dependence");
    // du/dx = (du/dpsi) J^-1, computed as (J^-T (du/dpsi)^T)^T.
    const Mat sens = J.transpose().fullPivLu().solve(law.input_jacobian(psi, w).transpose()).transpose();
    for (Eigen::Index c = 0; c < sens.cols(); ++c) {
      rep.sensitivity[static_cast<std::size_t>(c)] =
          std::max(rep.sensitivity[static_cast<std::size_t>(c)], sens.col(c).cwiseAbs().maxCoeff());
    }
    ++rep.points;
  }
  for (double s : rep.sensitivity) rep.depends.push_back(s > threshold);
  return rep;
}

}  // namespace qslin
