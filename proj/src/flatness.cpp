#include "qslin/flatness.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qslin/error.hpp"

namespace qslin {

namespace {

// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    out.push_back(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return out;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

JetPoint random_jet(std::size_t m, int max_order, double box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-box, box);
  JetPoint y(m, max_order);
  for (auto& x : y.data()) x = dist(rng);
  return y;
}

int order_or(int ord, int offset, int absent) { return ord < 0 ? absent : ord + offset; }

}  // namespace

MultiIndex scan_R(const FlatMap& fm) {
  const MultiIndex oq = highest_orders(fm.Fq, fm.outputs);
  const MultiIndex ov = highest_orders(fm.Fv, fm.outputs);
  MultiIndex r(fm.outputs);
  for (std::size_t j = 0; j < fm.outputs; ++j) r[j] = std::max(order_or(oq[j], 2, 0), order_or(ov[j], 1, 0));
  return r;
}

MultiIndex scan_S(const FlatMap& fm) {
  const MultiIndex ou = highest_orders(fm.Fu, fm.outputs);
  MultiIndex s(fm.outputs);
  for (std::size_t j = 0; j < fm.outputs; ++j) s[j] = std::max(ou[j], 0);
  return s;
}

FlatMap build_flat_map(const ClassicalStateForm& csf, const std::vector<Expr>& phi, const std::vector<Expr>& Fq,
                       const FlatMapOptions& opt, FlatMapCertificate* certificate) {
  const auto& sys = csf.system();
  const std::size_t p = sys.p();
  const std::size_t m_out = phi.size();
  if (Fq.size() != p) {
    throw ValidationError("F_q has " + std::to_string(Fq.size()) + " rows, expected " + std::to_string(p));
  }
  if (m_out == 0) throw ValidationError("no flat outputs given");
  if (opt.max_order < 2) throw ValidationError("max_order must be at least 2");
  const std::set<std::string> qset(sys.q.begin(), sys.q.end());
  for (std::size_t j = 0; j < m_out; ++j) {
    for (const auto& name : free_variables(phi[j])) {
      if (!qset.count(name)) {
        throw ValidationError("flat output " + std::to_string(j + 1) + " depends on '" + name +
                              "', which is not a configuration variable");
      }
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (const auto& name : free_variables(Fq[i])) {
      auto jv = parse_jet_name(name);
      if (!jv || jv->output >= m_out) {
        throw ValidationError("F_q row " + std::to_string(i + 1) + " uses '" + name + "', which is not a jet variable");
      }
      if (jv->order > opt.max_order - 2) {
        throw ValidationError("F_q row " + std::to_string(i + 1) + " uses '" + name + "' beyond max_order - 2");
      }
    }
  }

  FlatMap fm;
  fm.outputs = m_out;
  fm.max_order = opt.max_order;
  fm.q_names = sys.q;
  fm.v_names = sys.v;
  fm.u_names = sys.u;
  fm.Fq = Fq;
  std::vector<Expr> acc;
  for (const auto& e : Fq) fm.Fv.push_back(total_derivative(e, opt.max_order));
  for (const auto& e : fm.Fv) acc.push_back(total_derivative(e, opt.max_order));

  Substitution on_jets;
  for (std::size_t i = 0; i < p; ++i) {
    on_jets[sys.q[i]] = fm.Fq[i];
    on_jets[sys.v[i]] = fm.Fv[i];
    on_jets[sys.accel(i)] = acc[i];
  }
  // Left side M a + c on the jets, and G on the jets.
  std::vector<Expr> lhs(p);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<Expr> terms;
    for (std::size_t j = 0; j < p; ++j) terms.push_back(sys.metric[i][j] * Expr::variable(sys.accel(j)));
    terms.push_back(csf.bias()[i]);
    lhs[i] = substitute(add(std::move(terms)), on_jets);
  }
  ExprMatrix G = make_matrix(p, sys.m());
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t a = 0; a < sys.m(); ++a) G[i][a] = substitute(sys.input_matrix[i][a], on_jets);
  }

  const auto names = jet_names(m_out, opt.max_order);
  std::mt19937_64 rng(opt.seed);

  // Solve for u on the m rows of G that are best conditioned across a few
  // random jets; the residual check below covers the remaining rows.
  std::vector<std::size_t> force_rows;
  if (sys.m() > 0) {
    MatrixProgram gprog(G, names);
    std::vector<JetPoint> probes;
    for (int k = 0; k < 5; ++k) probes.push_back(random_jet(m_out, opt.max_order, opt.jet_box, rng));
    double best = -1.0;
    for (const auto& rowset : subsets(p, sys.m())) {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& y : probes) {
        Mat g = gprog(y.data());
        Mat sub(rowset.size(), g.cols());
        for (std::size_t r = 0; r < rowset.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = g.row(static_cast<Eigen::Index>(rowset[r]));
        worst = std::min(worst, rank_info(sub).sigma_min);
      }
      if (worst > best) {
        best = worst;
        force_rows = rowset;
      }
    }
    if (best <= 0.0) throw MathConditionError("input matrix has no invertible row subset along the flat map");
    ExprMatrix Gs = rows(G, force_rows);
    std::vector<Expr> rhs;
    for (auto r : force_rows) rhs.push_back(lhs[r]);
    fm.Fu = cramer_solve(Gs, rhs);
  }

  fm.R = scan_R(fm);
  fm.S = scan_S(fm);

  // Certification at random jets.
  std::vector<Expr> outs = lhs;
  for (const auto& e : fm.Fu) outs.push_back(e);
  std::vector<Expr> phi_on_jets;
  for (const auto& e : phi) phi_on_jets.push_back(substitute(e, on_jets));
  Program lhs_prog(outs, names);
  Program phi_prog(phi_on_jets, names);
  MatrixProgram gprog(G, names);
  FlatMapCertificate cert;
  cert.force_rows = force_rows;
  for (int k = 0; k < opt.residual_points; ++k) {
    JetPoint y = random_jet(m_out, opt.max_order, opt.jet_box, rng);
    auto vals = lhs_prog.run(y.data());
    Vec l = Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(p));
    Vec u = Eigen::Map<Vec>(vals.data() + p, static_cast<Eigen::Index>(sys.m()));
    Vec r = l - gprog(y.data()) * u;
    const double scale = 1.0 + l.lpNorm<Eigen::Infinity>();
    cert.max_residual = std::max(cert.max_residual, r.lpNorm<Eigen::Infinity>() / scale);
    auto ph = phi_prog.run(y.data());
    for (std::size_t j = 0; j < m_out; ++j) {
      cert.max_output_error = std::max(cert.max_output_error, std::abs(ph[j] - y(j, 0)));
    }
    ++cert.points;
  }
  if (certificate) *certificate = cert;
  if (cert.max_output_error > 1e-8) {
    throw MathConditionError("F_q does not reproduce the flat output: |phi(F_q) - y| = " +
                             std::to_string(cert.max_output_error));
  }
  if (cert.max_residual > opt.residual_tol) {
    throw MathConditionError("F_q is not a flat parameterization of this system: dynamics residual " +
                             std::to_string(cert.max_residual));
  }
  if (opt.check_order_bounds && m_out + 1 == p) {
    bool has_four = false;
    for (std::size_t j = 0; j < m_out; ++j) {
      if (fm.R[j] < 2 || fm.R[j] > 4) {
        throw MathConditionError("order bound violated: R = " + fm.R.str() + " must lie between 2 and 4");
      }
      has_four = has_four || fm.R[j] == 4;
    }
    if (!has_four) throw MathConditionError("order bound violated: R = " + fm.R.str() + " has no component equal to 4");
  }
  return fm;
}

FlatMap restrict_to_generalized(const FlatMap& fm, const GeneralizedSystem& gen) {
  if (fm.rows() != gen.classical().system().p()) throw ValidationError("flat map does not match the system");
  FlatMap out;
  out.outputs = fm.outputs;
  out.max_order = fm.max_order;
  out.generalized = true;
  out.q_names = gen.q();
  out.v_names = gen.v();
  out.u_names = gen.u();
  for (auto i : gen.kept()) {
    out.Fq.push_back(fm.Fq[i]);
    out.Fv.push_back(fm.Fv[i]);
  }
  for (const auto& s : gen.selection()) out.Fu.push_back(fm.Fq[s.coordinate]);
  for (auto a : gen.remaining_inputs()) out.Fu.push_back(fm.Fu[a]);
  out.R = scan_R(out);
  out.S = scan_S(out);
  return out;
}

JetJacobian::JetJacobian(const std::vector<Expr>& rows, const std::vector<std::string>& wrt, std::size_t m,
                         int max_order)
    : rows_(rows.size()), cols_(wrt.size()) {
  std::vector<Expr> entries;
  entries.reserve(rows_ * cols_);
  for (const auto& e : rows) {
    for (const auto& v : wrt) entries.push_back(diff(e, v));
  }
  const auto names = jet_names(m, max_order);
  jac_ = Program(entries, names);
  val_ = Program(rows, names);
}

Mat JetJacobian::operator()(const JetPoint& y) const {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a(rows_, cols_);
  jac_.run(y.data(), std::span<double>(a.data(), rows_ * cols_));
  return a;
}

Vec JetJacobian::values(const JetPoint& y) const { return to_eigen(val_.run(y.data())); }

EquilibriumJacobianReport equilibrium_jacobian(const FlatMap& fm, const JetPoint& y_s) {
  if (y_s.outputs() != fm.outputs || y_s.max_order() != fm.max_order) {
    throw ValidationError("jet point does not match the flat map");
  }
  const std::size_t m = fm.outputs;
  std::vector<std::string> wrt;
  for (int a = 0; a <= 3; ++a) {
    for (std::size_t j = 0; j < m; ++j) wrt.push_back(jet_name(j, a));
  }
  Mat jq, jv;
  try {
    jq = JetJacobian(fm.Fq, wrt, m, fm.max_order)(y_s);
    jv = JetJacobian(fm.Fv, wrt, m, fm.max_order)(y_s);
  } catch (const EvalError& e) {
    throw MathConditionError(std::string("parameterization is not defined at the equilibrium: ") + e.what());
  }
  if (!jq.allFinite() || !jv.allFinite()) throw MathConditionError("parameterization is not finite at the equilibrium");
  EquilibriumJacobianReport r;
  r.y_s = y_s;
  const auto mi = static_cast<Eigen::Index>(m);
  for (int a = 0; a <= 3; ++a) {
    r.Q.push_back(jq.middleCols(a * mi, mi));
    r.V.push_back(jv.middleCols(a * mi, mi));
  }
  r.rank_Q0 = rank_info(r.Q[0]).rank;
  r.rank_Q2 = rank_info(r.Q[2]).rank;
  // Under a relative threshold, roundoff-sized entries would count as rank 1.
  if (r.Q[2].cwiseAbs().maxCoeff() <= 1e-12) r.rank_Q2 = 0;
  r.max_zero_block = std::max(r.Q[1].cwiseAbs().maxCoeff(), r.Q[3].cwiseAbs().maxCoeff());
  r.max_velocity_mismatch =
      std::max((r.V[1] - r.Q[0]).cwiseAbs().maxCoeff(), (r.V[3] - r.Q[2]).cwiseAbs().maxCoeff());
  r.max_velocity_zero_block = std::max(r.V[0].cwiseAbs().maxCoeff(), r.V[2].cwiseAbs().maxCoeff());
  return r;
}

StructureCheck verify_equilibrium_structure(const EquilibriumJacobianReport& report, double tol) {
  StructureCheck res;
  const auto m = report.Q[0].cols();
  auto fail = [&](std::string msg) { res.diagnostics.push_back(std::move(msg)); };
  if (report.rank_Q0 != m) {
    fail("rank dF_q/dy = " + std::to_string(report.rank_Q0) + ", expected " + std::to_string(m));
  }
  if (report.rank_Q2 > 1) fail("rank dF_q/dy_[2] = " + std::to_string(report.rank_Q2) + " exceeds 1");
  if (report.max_zero_block > tol) {
    fail("dF_q/dy_[1] or dF_q/dy_[3] is nonzero (max entry " + std::to_string(report.max_zero_block) + ")");
  }
  if (report.max_velocity_zero_block > tol) {
    fail("dF_v/dy or dF_v/dy_[2] is nonzero (max entry " + std::to_string(report.max_velocity_zero_block) + ")");
  }
  if (report.max_velocity_mismatch > tol) {
    fail("velocity blocks differ from configuration blocks by " + std::to_string(report.max_velocity_mismatch));
  }
  res.pass = res.diagnostics.empty();
  return res;
}

std::vector<std::string> regularity_columns(const MultiIndex& kappa) {
  return jet_range(MultiIndex(kappa.size(), 0), kappa - 1);
}

Mat regularity_matrix(const FlatMap& fm, const MultiIndex& kappa, const JetPoint& y) {
  std::vector<Expr> rows = fm.Fq;
  rows.insert(rows.end(), fm.Fv.begin(), fm.Fv.end());
  return JetJacobian(rows, regularity_columns(kappa), fm.outputs, fm.max_order)(y);
}

std::vector<KappaCandidate> enumerate_kappa(const FlatMap& fm, const JetPoint& y_s, const KappaOptions& opt) {
  const auto report = equilibrium_jacobian(fm, y_s);
  const Mat& Q0 = report.Q[0];
  const Mat& Q2 = report.Q[2];
  const std::size_t n = fm.rows();
  const std::size_t m = fm.outputs;
  const int target = static_cast<int>(2 * n);

  auto cols_of = [&](const std::vector<std::size_t>& s, std::optional<std::size_t> extra) {
    Mat a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.size() + (extra ? 1 : 0)));
    for (std::size_t c = 0; c < s.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = Q0.col(static_cast<Eigen::Index>(s[c]));
    if (extra) a.col(a.cols() - 1) = Q2.col(static_cast<Eigen::Index>(*extra));
    return a;
  };
  auto admissible = [&](const MultiIndex& k) { return k.leq(fm.R) && k.sum() == target; };
  auto full_sigma = [&](const MultiIndex& k) {
    return rank_info(regularity_matrix(fm, k, y_s), opt.rank_tol).sigma_min;
  };

  std::vector<KappaCandidate> case_i, case_ii;
  for (const auto& s : subsets(m, n)) {
    auto info = rank_info(cols_of(s, std::nullopt), opt.rank_tol);
    if (info.rank != static_cast<int>(n)) continue;
    MultiIndex k(m, 0);
    for (auto j : s) k[j] = 2;
    if (!admissible(k)) continue;
    KappaCandidate c;
    c.kappa = k;
    c.case_tag = KappaCandidate::Case::I;
    c.subset = s;
    c.margin = info.sigma_min;
    c.sigma_min = full_sigma(k);
    case_i.push_back(std::move(c));
  }
  if (n >= 2) {
    for (const auto& s : subsets(m, n - 1)) {
      if (rank_info(cols_of(s, std::nullopt), opt.rank_tol).rank != static_cast<int>(n - 1)) continue;
      for (auto j : s) {
        auto info = rank_info(cols_of(s, j), opt.rank_tol);
        if (info.rank != static_cast<int>(n)) continue;
        MultiIndex k(m, 0);
        for (auto i : s) k[i] = 2;
        k[j] = 4;
        if (!admissible(k)) continue;
        KappaCandidate c;
        c.kappa = k;
        c.case_tag = KappaCandidate::Case::II;
        c.subset = s;
        c.column = j;
        c.margin = info.sigma_min;
        c.sigma_min = full_sigma(k);
        case_ii.push_back(std::move(c));
      }
    }
  }
  std::stable_sort(case_ii.begin(), case_ii.end(),
                   [](const KappaCandidate& a, const KappaCandidate& b) { return a.margin > b.margin; });
  case_i.insert(case_i.end(), case_ii.begin(), case_ii.end());
  return case_i;
}

JetPoint sample_ball(const JetPoint& center, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  JetPoint y = center;
  auto d = y.data();
  std::vector<double> dir(d.size());
  double norm = 0.0;
  for (auto& x : dir) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += r * dir[i] / norm;
  return y;
}

RegularityReport check_regularity(const FlatMap& fm, const MultiIndex& kappa, const JetPoint& y_s,
                                  const RegularityOptions& opt) {
  const int target = static_cast<int>(2 * fm.rows());
  if (kappa.size() != fm.outputs || !kappa.nonnegative() || !kappa.leq(fm.R) || kappa.sum() != target) {
    throw ValidationError("chain lengths " + kappa.str() + " must satisfy 0 <= kappa <= R = " + fm.R.str() +
                          " and sum to " + std::to_string(target));
  }
  std::vector<Expr> rows = fm.Fq;
  rows.insert(rows.end(), fm.Fv.begin(), fm.Fv.end());
  JetJacobian jac(rows, regularity_columns(kappa), fm.outputs, fm.max_order);
  RegularityReport r;
  r.kappa = kappa;
  auto at = rank_info(jac(y_s), opt.rank_tol);
  r.sigma_min_at_equilibrium = at.sigma_min;
  r.rank_at_equilibrium = at.rank;
  r.sigma_min_over_ball = at.sigma_min;
  std::mt19937_64 rng(opt.seed);
  for (int k = 0; k < opt.samples; ++k) {
    r.sigma_min_over_ball = std::min(r.sigma_min_over_ball, rank_info(jac(sample_ball(y_s, opt.radius, rng))).sigma_min);
    ++r.samples;
  }
  r.regular = r.rank_at_equilibrium == target;
  return r;
}

}  // namespace qslin
