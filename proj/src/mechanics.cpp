#include "qslin/mechanics.hpp"

#include <random>
#include <set>

#include "qslin/error.hpp"

namespace qslin {

namespace {

std::string entry_name(const char* what, std::size_t i, std::size_t j) {
  return std::string(what) + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]";
}

void check_scope(const Expr& e, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& name : free_variables(e)) {
    if (!allowed.count(name)) throw ValidationError(where + " uses unknown variable '" + name + "'");
  }
}

std::vector<std::string> concat(std::initializer_list<const std::vector<std::string>*> parts) {
  std::vector<std::string> out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

}  // namespace

void LagrangianSystem::validate() const {
  const std::size_t n = p();
  if (n == 0) throw ValidationError("system has no coordinates");
  if (v.size() != n) throw ValidationError("velocities: expected " + std::to_string(n) + " names");
  std::set<std::string> names;
  for (const auto* list : {&q, &v, &u}) {
    for (const auto& s : *list) {
      if (!names.insert(s).second) throw ValidationError("duplicate variable name '" + s + "'");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& suffix : {"_d1", "_d2"}) {
      if (names.count(q[i] + suffix)) throw ValidationError("variable name '" + q[i] + suffix + "' is reserved");
    }
  }
  if (metric.size() != n) throw ValidationError("metric: expected " + std::to_string(n) + " rows");
  if (input_matrix.size() != n) throw ValidationError("input_matrix: expected " + std::to_string(n) + " rows");
  const std::set<std::string> qset(q.begin(), q.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (metric[i].size() != n) throw ValidationError("metric row " + std::to_string(i + 1) + " has wrong length");
    if (input_matrix[i].size() != m()) {
      throw ValidationError("input_matrix row " + std::to_string(i + 1) + " has wrong length");
    }
    for (std::size_t j = 0; j < n; ++j) check_scope(metric[i][j], qset, entry_name("metric", i, j));
    for (std::size_t j = 0; j < m(); ++j) check_scope(input_matrix[i][j], qset, entry_name("input_matrix", i, j));
  }
  check_scope(potential, qset, "potential");

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<VarBinding> samples(5);
  for (auto& b : samples) {
    for (const auto& s : q) b[s] = dist(rng);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Expr a = simplify(metric[i][j]);
      const Expr b = simplify(metric[j][i]);
      if (normalize(a) == normalize(b)) continue;
      bool equal = true;
      for (const auto& s : samples) {
        double x = 0.0, y = 0.0;
        try {
          x = eval(a, s);
          y = eval(b, s);
        } catch (const EvalError&) {
          continue;
        }
        if (std::abs(x - y) > 1e-12 * (1.0 + std::abs(x) + std::abs(y))) equal = false;
      }
      if (!equal) {
        throw ValidationError("metric is not symmetric: " + entry_name("metric", i, j) +
                              " differs from " + entry_name("metric", j, i));
      }
    }
  }
}

ClassicalStateForm::ClassicalStateForm(LagrangianSystem sys) : sys_(std::move(sys)) {
  sys_.validate();
  const std::size_t n = sys_.p();
  const auto& g = sys_.metric;
  c_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Expr> terms;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        Expr coeff = diff(g[i][j], sys_.q[k]) - Expr::constant(0.5) * diff(g[j][k], sys_.q[i]);
        if (coeff.is_constant(0.0)) continue;
        terms.push_back(mul({coeff, Expr::variable(sys_.v[j]), Expr::variable(sys_.v[k])}));
      }
    }
    terms.push_back(diff(sys_.potential, sys_.q[i]));
    c_[i] = add(std::move(terms));
  }
  residual_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Expr> terms;
    for (std::size_t j = 0; j < n; ++j) terms.push_back(g[i][j] * Expr::variable(sys_.accel(j)));
    terms.push_back(c_[i]);
    for (std::size_t a = 0; a < sys_.m(); ++a) {
      terms.push_back(-(sys_.input_matrix[i][a] * Expr::variable(sys_.u[a])));
    }
    residual_[i] = add(std::move(terms));
  }
  mass_prog_ = MatrixProgram(sys_.metric, sys_.q);
  input_prog_ = MatrixProgram(sys_.input_matrix, sys_.q);
  bias_prog_ = Program(c_, concat({&sys_.q, &sys_.v}));
  potential_prog_ = Program(std::span<const Expr>(&sys_.potential, 1), sys_.q);
}

Mat ClassicalStateForm::mass(const Vec& q) const { return mass_prog_(std::span(q.data(), q.size())); }

Mat ClassicalStateForm::input(const Vec& q) const { return input_prog_(std::span(q.data(), q.size())); }

Vec ClassicalStateForm::bias(const Vec& q, const Vec& v) const {
  std::vector<double> in(q.data(), q.data() + q.size());
  in.insert(in.end(), v.data(), v.data() + v.size());
  return to_eigen(bias_prog_.run(in));
}

Vec ClassicalStateForm::rhs(const Vec& q, const Vec& v, const Vec& u) const {
  const Mat m = mass(q);
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError("mass matrix is not positive definite");
  return llt.solve(input(q) * u - bias(q, v));
}

Vec ClassicalStateForm::implicit_residual(const Vec& q, const Vec& v, const Vec& a, const Vec& u) const {
  return mass(q) * a + bias(q, v) - input(q) * u;
}

double ClassicalStateForm::energy(const Vec& q, const Vec& v) const {
  double pot = 0.0;
  potential_prog_.run(std::span(q.data(), q.size()), std::span(&pot, 1));
  return 0.5 * v.dot(mass(q) * v) + pot;
}

ClassicalStateForm euler_lagrange(const LagrangianSystem& sys) { return ClassicalStateForm(sys); }

GeneralizedSystem::GeneralizedSystem(const ClassicalStateForm& csf, std::vector<Promotion> selection)
    : csf_(csf), selection_(std::move(selection)) {
  const auto& sys = csf_.system();
  const std::size_t p = sys.p();
  const std::size_t m = sys.m();
  if (selection_.size() > m) throw ValidationError("more promotions than inputs");
  std::vector<bool> coord_used(p, false), input_used(m, false);
  for (const auto& s : selection_) {
    if (s.input >= m) throw ValidationError("promotion input index out of range");
    if (s.coordinate >= p) throw ValidationError("promotion coordinate index out of range");
    if (input_used[s.input]) throw ValidationError("input '" + sys.u[s.input] + "' promoted twice");
    if (coord_used[s.coordinate]) throw ValidationError("coordinate '" + sys.q[s.coordinate] + "' promoted twice");
    input_used[s.input] = true;
    coord_used[s.coordinate] = true;
  }
  for (std::size_t i = 0; i < p; ++i) {
    if (!coord_used[i]) kept_.push_back(i);
  }
  for (std::size_t a = 0; a < m; ++a) {
    if (!input_used[a]) remaining_.push_back(a);
  }
  for (auto i : kept_) {
    q_.push_back(sys.q[i]);
    v_.push_back(sys.v[i]);
  }
  for (const auto& s : selection_) u_.push_back(sys.q[s.coordinate]);
  for (auto a : remaining_) u_.push_back(sys.u[a]);

  // Unknowns: accelerations of kept coordinates, then the selected forces.
  const ExprMatrix& M = sys.metric;
  const ExprMatrix& G = sys.input_matrix;
  mixed_ = make_matrix(p, p);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < kept_.size(); ++c) mixed_[r][c] = M[r][kept_[c]];
    for (std::size_t c = 0; c < selection_.size(); ++c) mixed_[r][kept_.size() + c] = -G[r][selection_[c].input];
  }
  std::vector<Expr> b(p);
  for (std::size_t r = 0; r < p; ++r) {
    std::vector<Expr> terms{-csf_.bias()[r]};
    for (auto a : remaining_) terms.push_back(G[r][a] * Expr::variable(sys.u[a]));
    for (const auto& s : selection_) {
      terms.push_back(-(M[r][s.coordinate] * Expr::variable(sys.accel(s.coordinate))));
    }
    b[r] = add(std::move(terms));
  }
  std::vector<Expr> x;
  try {
    x = cramer_solve(mixed_, b);
  } catch (const MathConditionError&) {
    throw MathConditionError("promotion leaves a structurally singular system");
  }
  Substitution rename;
  for (const auto& s : selection_) rename[sys.v[s.coordinate]] = Expr::variable(sys.q[s.coordinate] + "_d1");
  for (std::size_t i = 0; i < x.size(); ++i) {
    Expr e = substitute(x[i], rename);
    (i < kept_.size() ? rhs_ : forces_).push_back(e);
  }

  B_ = MultiIndex(m);
  std::set<std::string> used;
  for (const auto& e : rhs_) {
    auto fv = free_variables(e);
    used.insert(fv.begin(), fv.end());
  }
  for (std::size_t i = 0; i < selection_.size(); ++i) {
    const std::string& base = sys.q[selection_[i].coordinate];
    if (used.count(base + "_d1")) B_[i] = 1;
    if (used.count(base + "_d2")) B_[i] = 2;
  }
  for (const auto& s : selection_) {
    const std::string& base = sys.q[s.coordinate];
    input_args_.push_back(base);
    input_args_.push_back(base + "_d1");
    input_args_.push_back(base + "_d2");
  }
  for (auto a : remaining_) input_args_.push_back(sys.u[a]);
  args_ = concat({&q_, &v_, &input_args_});

  rhs_prog_ = Program(rhs_, args_);
  forces_prog_ = Program(forces_, args_);
  std::vector<std::string> mixed_args = sys.q;
  mixed_prog_ = MatrixProgram(mixed_, mixed_args);
}

Vec GeneralizedSystem::rhs(std::span<const double> args) const { return to_eigen(rhs_prog_.run(args)); }

Vec GeneralizedSystem::eliminated_forces(std::span<const double> args) const {
  return to_eigen(forces_prog_.run(args));
}

double GeneralizedSystem::mixed_condition(std::span<const double> args) const {
  // Mixed matrix depends on the full configuration: kept q~ then promoted.
  const auto& sys = csf_.system();
  std::vector<double> q(sys.p());
  for (std::size_t i = 0; i < kept_.size(); ++i) q[kept_[i]] = args[i];
  const std::size_t off = 2 * kept_.size();
  for (std::size_t i = 0; i < selection_.size(); ++i) q[selection_[i].coordinate] = args[off + 3 * i];
  return condition_number(mixed_prog_(q));
}

GeneralizedSystem promote(const ClassicalStateForm& csf, std::vector<Promotion> selection) {
  return GeneralizedSystem(csf, std::move(selection));
}

Equilibrium find_equilibrium(const ClassicalStateForm& csf, const Vec& q_guess, const Vec& u_guess,
                             const std::map<std::string, double>& fixed, double tol, int max_iter) {
  const auto& sys = csf.system();
  const std::size_t p = sys.p();
  const std::size_t m = sys.m();
  if (static_cast<std::size_t>(q_guess.size()) != p || static_cast<std::size_t>(u_guess.size()) != m) {
    throw ValidationError("equilibrium guess has wrong dimension");
  }
  std::vector<std::string> names = concat({&sys.q, &sys.u});
  Vec z(p + m);
  z << q_guess, u_guess;
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto it = fixed.find(names[i]);
    if (it == fixed.end()) {
      free_idx.push_back(i);
    } else {
      z(static_cast<Eigen::Index>(i)) = it->second;
    }
  }
  for (const auto& [name, _] : fixed) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ValidationError("unknown fixed variable '" + name + "'");
    }
  }

  // r(q, u) = c(q, 0) - G(q) u
  Substitution rest;
  for (const auto& s : sys.v) rest[s] = Expr::constant(0.0);
  std::vector<Expr> r(p);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<Expr> terms{substitute(csf.bias()[i], rest)};
    for (std::size_t a = 0; a < m; ++a) terms.push_back(-(sys.input_matrix[i][a] * Expr::variable(sys.u[a])));
    r[i] = add(std::move(terms));
  }
  ExprMatrix jac = make_matrix(p, free_idx.size());
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t c = 0; c < free_idx.size(); ++c) jac[i][c] = diff(r[i], names[free_idx[c]]);
  }
  Program rprog(r, names);
  MatrixProgram jprog(jac, names);

  Equilibrium eq;
  for (int it = 0; it <= max_iter; ++it) {
    std::span<const double> zs(z.data(), z.size());
    Vec res = to_eigen(rprog.run(zs));
    eq.residual = res.lpNorm<Eigen::Infinity>();
    eq.iterations = it;
    if (eq.residual <= tol) {
      eq.q = z.head(p);
      eq.u = z.tail(m);
      return eq;
    }
    if (it == max_iter) break;
    Mat J = jprog(zs);
    Vec dz = J.completeOrthogonalDecomposition().solve(-res);
    if (!dz.allFinite()) break;
    for (std::size_t c = 0; c < free_idx.size(); ++c) z(static_cast<Eigen::Index>(free_idx[c])) += dz(c);
  }
  throw NumericError("equilibrium search did not converge in " + std::to_string(max_iter) +
                     " iterations (residual " + std::to_string(eq.residual) + ")");
}

}  // namespace qslin
