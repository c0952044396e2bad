#include "qslin/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "qslin/error.hpp"

namespace qslin {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// d^n/dtau^n of the polynomial with coefficients c at tau.
double poly_derivative(const std::vector<double>& c, int n, double tau) {
  double acc = 0.0;
  for (int k = static_cast<int>(c.size()) - 1; k >= n; --k) {
    double f = c[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i) f *= (k - i);
    acc = acc * tau + f;
  }
  return acc;
}

// Evaluates near whichever end is closer so the vanishing boundary
// derivatives come out exactly zero.
double profile(const std::vector<double>& c, double tau, int n) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return n == 0 ? 1.0 : 0.0;
  if (tau <= 0.5) return poly_derivative(c, n, tau);
  const double mirrored = poly_derivative(c, n, 1.0 - tau);
  if (n == 0) return 1.0 - mirrored;
  return (n % 2 == 0 ? -1.0 : 1.0) * mirrored;
}

[[noreturn]] void rethrow_at(const Error& e, double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "at t = %.6g s: ", t);
  const std::string msg = buf + std::string(e.what());
  switch (e.category()) {
    case Error::Category::Validation:
      throw ValidationError(msg);
    case Error::Category::MathCondition:
      throw MathConditionError(msg);
    case Error::Category::Numeric:
      break;
  }
  throw NumericError(msg);
}

std::size_t steps_for(const SimOptions& opt) {
  if (!(opt.dt > 0.0)) throw ValidationError("time step must be positive");
  if (opt.T < 0.0) throw ValidationError("duration must not be negative");
  return static_cast<std::size_t>(std::llround(opt.T / opt.dt));
}

Trajectory empty_trajectory(const GeneralizedPlant& plant, std::size_t m) {
  const auto& gen = plant.system();
  Trajectory tr;
  tr.state_names = gen.q();
  tr.state_names.insert(tr.state_names.end(), gen.v().begin(), gen.v().end());
  tr.input_names = gen.u();
  for (std::size_t j = 0; j < m; ++j) tr.output_names.push_back(jet_name(j, 0));
  tr.promoted = gen.k();
  return tr;
}

// Promoted rows of F_u~ differentiated once and twice along the jets.
std::vector<Expr> promoted_derivatives(const FlatMap& fm, std::size_t k) {
  std::vector<Expr> out(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = total_derivative(fm.Fu[i], fm.max_order);
    out[k + i] = total_derivative(out[i], fm.max_order);
  }
  return out;
}

}  // namespace

std::vector<double> transition_coefficients(int b) {
  if (b < 0) throw ValidationError("boundary order must not be negative");
  std::vector<double> c(static_cast<std::size_t>(2 * b + 2), 0.0);
  for (int i = 0; i <= b; ++i) {
    const double w = binomial(b + i, i);
    for (int l = 0; l <= i; ++l) {
      c[static_cast<std::size_t>(b + 1 + l)] += w * binomial(i, l) * (l % 2 == 0 ? 1.0 : -1.0);
    }
  }
  return c;
}

double transition_profile(double tau, int n, int b) { return profile(transition_coefficients(b), tau, n); }

ReferenceTrajectory::ReferenceTrajectory(std::vector<double> start, std::vector<double> end, double T,
                                         int boundary_order)
    : start_(std::move(start)), end_(std::move(end)), T_(T), b_(boundary_order) {
  if (start_.size() != end_.size()) throw ValidationError("start and end have different lengths");
  if (T_ < 0.0) throw ValidationError("transition time must not be negative");
  coeffs_ = transition_coefficients(b_);
}

double ReferenceTrajectory::operator()(std::size_t j, int n, double t) const {
  const double delta = end_[j] - start_[j];
  if (T_ <= 0.0 || delta == 0.0) return n == 0 ? end_[j] : 0.0;
  const double s = profile(coeffs_, t / T_, n);
  if (n == 0) return start_[j] + delta * s;
  return delta * s / std::pow(T_, n);
}

JetPoint ReferenceTrajectory::jets(double t, int max_order) const {
  JetPoint y(outputs(), max_order);
  for (std::size_t j = 0; j < outputs(); ++j) {
    for (int a = 0; a <= max_order; ++a) y(j, a) = (*this)(j, a, t);
  }
  return y;
}

ReferenceTrajectory plan_rest_to_rest(const GeneralizedSystem& gen, const FlatMap& fm, std::vector<double> start,
                                      std::vector<double> end, double T, int boundary_order, double tol) {
  if (start.size() != fm.outputs || end.size() != fm.outputs) {
    throw ValidationError("endpoints need " + std::to_string(fm.outputs) + " values");
  }
  const auto names = jet_names(fm.outputs, fm.max_order);
  const Program qp(fm.Fq, names), vp(fm.Fv, names), up(fm.Fu, names);
  const std::size_t k = gen.k();
  for (const auto* pt : {&start, &end}) {
    const JetPoint y = make_equilibrium(*pt, fm.max_order);
    std::vector<double> args;
    std::vector<double> v, u;
    double f_norm = 0.0, v_norm = 0.0;
    try {
      args = qp.run(y.data());
      v = vp.run(y.data());
      u = up.run(y.data());
      args.insert(args.end(), v.begin(), v.end());
      for (std::size_t i = 0; i < u.size(); ++i) {
        args.push_back(u[i]);
        if (i < k) args.insert(args.end(), {0.0, 0.0});
      }
      f_norm = gen.rhs(args).lpNorm<Eigen::Infinity>();
    } catch (const EvalError& e) {
      throw MathConditionError(std::string("flat map undefined at a transition endpoint: ") + e.what());
    }
    for (double x : v) v_norm = std::max(v_norm, std::abs(x));
    if (!(f_norm <= tol) || v_norm > tol) {
      throw MathConditionError("transition endpoint is not an equilibrium (|f| = " + std::to_string(f_norm) +
                               ", |v| = " + std::to_string(v_norm) + ")");
    }
  }
  return ReferenceTrajectory(std::move(start), std::move(end), T, boundary_order);
}

GeneralizedPlant::GeneralizedPlant(const GeneralizedSystem& gen, std::vector<Expr> phi)
    : gen_(gen), phi_prog_(phi, gen.classical().system().q) {}

std::vector<double> GeneralizedPlant::arguments(const Vec& x, const Vec& u, const Vec& u_d1, const Vec& u_d2) const {
  std::vector<double> args(x.data(), x.data() + x.size());
  const auto k = static_cast<Eigen::Index>(gen_.k());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    args.push_back(u(i));
    if (i < k) args.insert(args.end(), {u_d1(i), u_d2(i)});
  }
  return args;
}

Vec GeneralizedPlant::derivative(const Vec& x, const Vec& u, const Vec& u_d1, const Vec& u_d2) const {
  const Eigen::Index n = x.size() / 2;
  Vec dx(x.size());
  dx.head(n) = x.tail(n);
  dx.tail(n) = gen_.rhs(arguments(x, u, u_d1, u_d2));
  return dx;
}

Vec GeneralizedPlant::classical_q(const Vec& x, const Vec& u) const {
  Vec q(static_cast<Eigen::Index>(gen_.classical().system().p()));
  for (std::size_t i = 0; i < gen_.kept().size(); ++i) q(static_cast<Eigen::Index>(gen_.kept()[i])) = x(static_cast<Eigen::Index>(i));
  for (std::size_t i = 0; i < gen_.k(); ++i) {
    q(static_cast<Eigen::Index>(gen_.selection()[i].coordinate)) = u(static_cast<Eigen::Index>(i));
  }
  return q;
}

Vec GeneralizedPlant::classical_v(const Vec& x, const Vec& u_d1) const {
  const Eigen::Index n = x.size() / 2;
  Vec v(static_cast<Eigen::Index>(gen_.classical().system().p()));
  for (std::size_t i = 0; i < gen_.kept().size(); ++i) {
    v(static_cast<Eigen::Index>(gen_.kept()[i])) = x(n + static_cast<Eigen::Index>(i));
  }
  for (std::size_t i = 0; i < gen_.k(); ++i) {
    v(static_cast<Eigen::Index>(gen_.selection()[i].coordinate)) = u_d1(static_cast<Eigen::Index>(i));
  }
  return v;
}

Vec GeneralizedPlant::classical_u(const Vec& x, const Vec& u, const Vec& u_d1, const Vec& u_d2) const {
  Vec f(static_cast<Eigen::Index>(gen_.classical().system().m()));
  const Vec forces = gen_.eliminated_forces(arguments(x, u, u_d1, u_d2));
  for (std::size_t i = 0; i < gen_.k(); ++i) f(static_cast<Eigen::Index>(gen_.selection()[i].input)) = forces(static_cast<Eigen::Index>(i));
  for (std::size_t r = 0; r < gen_.remaining_inputs().size(); ++r) {
    f(static_cast<Eigen::Index>(gen_.remaining_inputs()[r])) = u(static_cast<Eigen::Index>(gen_.k() + r));
  }
  return f;
}

Vec GeneralizedPlant::outputs(const Vec& x, const Vec& u) const {
  const Vec q = classical_q(x, u);
  return to_eigen(phi_prog_.run(std::span<const double>(q.data(), static_cast<std::size_t>(q.size()))));
}

Trajectory simulate_closed_loop(const GeneralizedPlant& plant, const FeedbackLaw& law, const ReferenceTrajectory& ref,
                                const Vec& x0, const SimOptions& opt) {
  const FlatMap& fm = law.flat_map();
  const GeneralizedSystem& gen = plant.system();
  const std::size_t k = gen.k();
  const auto K = static_cast<Eigen::Index>(k);
  if (static_cast<std::size_t>(x0.size()) != plant.state_dim()) throw ValidationError("initial state has wrong size");
  if (ref.outputs() != fm.outputs) throw ValidationError("reference has wrong number of outputs");
  const bool analytic = opt.strategy == "analytic";
  if (!analytic && opt.strategy != "numeric") throw ValidationError("unknown strategy '" + opt.strategy + "'");
  const std::size_t steps = steps_for(opt);
  const int jet_order = fm.max_order + law.kappa().max();
  const Program ud_prog(promoted_derivatives(fm, k), jet_names(fm.outputs, fm.max_order));

  struct Stage {
    Vec dx, u, ud1, ud2;
    PsiSolution sol;
  };
  // Numeric strategy: promoted rows of F_u~ sampled along the Taylor curve of
  // the solved jets at s = -2h..2h and differentiated with 5-point stencils.
  const Program u_prog(std::span<const Expr>(fm.Fu.data(), k), jet_names(fm.outputs, fm.max_order));
  const std::vector<double> offsets{-2.0 * opt.dt, -opt.dt, 0.0, opt.dt, 2.0 * opt.dt};
  const auto w1 = fd_weights(1, offsets, 0.0);
  const auto w2 = fd_weights(2, offsets, 0.0);

  FeedbackWorkspace ws;
  ws.psi = law.psi_from_jets(ref.jets(0.0, jet_order));

  auto stage = [&](double t, const Vec& x) {
    Stage s;
    try {
      const JetPoint w = law.w_from_jets(ref.jets(t, jet_order));
      s.sol = law.solve_psi(x, w, ws);
      s.u = law.input_at(s.sol.psi, w);
      const JetPoint y = law.assemble_jets(s.sol.psi, w);
      if (analytic) {
        const Vec d = to_eigen(ud_prog.run(y.data()));
        s.ud1 = d.head(K);
        s.ud2 = d.tail(K);
      } else {
        s.ud1 = Vec::Zero(K);
        s.ud2 = Vec::Zero(K);
        JetPoint shifted(y.outputs(), y.max_order());
        for (std::size_t i = 0; i < offsets.size(); ++i) {
          for (std::size_t j = 0; j < y.outputs(); ++j) {
            for (int a = 0; a <= y.max_order(); ++a) {
              double acc = 0.0, term = 1.0;
              for (int b = 0; a + b <= y.max_order(); ++b) {
                acc += term * y(j, a + b);
                term *= offsets[i] / (b + 1);
              }
              shifted(j, a) = acc;
            }
          }
          const Vec ui = to_eigen(u_prog.run(shifted.data()));
          s.ud1 += w1[i] * ui;
          s.ud2 += w2[i] * ui;
        }
      }
      s.dx = plant.derivative(x, s.u, s.ud1, s.ud2);
    } catch (const Error& e) {
      rethrow_at(e, t);
    }
    return s;
  };

  Trajectory tr = empty_trajectory(plant, fm.outputs);
  auto record = [&](double t, const Vec& x, const Stage& s) {
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.u.push_back(s.u);
    tr.u_d1.push_back(s.ud1);
    tr.u_d2.push_back(s.ud2);
    tr.y.push_back(plant.outputs(x, s.u));
    tr.iterations.push_back(s.sol.iterations);
    tr.solve_residual.push_back(s.sol.residual);
    tr.mixed_condition.push_back(gen.mixed_condition(plant.arguments(x, s.u, s.ud1, s.ud2)));
  };

  Vec x = x0;
  Vec prev_psi;
  double fastest = 0.0;
  const double h = opt.dt;
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * h;
    const Stage s1 = stage(t, x);
    record(t, x, s1);
    if (n > 0) {
      const double rate = (s1.sol.psi - prev_psi).lpNorm<Eigen::Infinity>() / h;
      const double limit = opt.branch_factor * std::max(1.0, fastest);
      if (rate > limit) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "at t = %.6g s: solution branch switch (psi rate %.3g exceeds %.3g)", t,
                      rate, limit);
        throw NumericError(buf);
      }
      fastest = std::max(fastest, rate);
    }
    prev_psi = s1.sol.psi;
    const Stage s2 = stage(t + 0.5 * h, x + 0.5 * h * s1.dx);
    const Stage s3 = stage(t + 0.5 * h, x + 0.5 * h * s2.dx);
    const Stage s4 = stage(t + h, x + h * s3.dx);
    x += h / 6.0 * (s1.dx + 2.0 * s2.dx + 2.0 * s3.dx + s4.dx);
    if (!x.allFinite()) throw NumericError("state became non-finite at t = " + std::to_string(t + h));
  }
  const double t_end = static_cast<double>(steps) * h;
  record(t_end, x, stage(t_end, x));
  return tr;
}

Trajectory flat_side_rollout(const GeneralizedPlant& plant, const FlatMap& fm, const ReferenceTrajectory& ref,
                             const SimOptions& opt) {
  const GeneralizedSystem& gen = plant.system();
  const std::size_t k = gen.k();
  const auto K = static_cast<Eigen::Index>(k);
  const std::size_t steps = steps_for(opt);
  const auto names = jet_names(fm.outputs, fm.max_order);
  std::vector<Expr> rows = fm.Fq;
  rows.insert(rows.end(), fm.Fv.begin(), fm.Fv.end());
  rows.insert(rows.end(), fm.Fu.begin(), fm.Fu.end());
  for (const auto& e : promoted_derivatives(fm, k)) rows.push_back(e);
  for (const auto& e : fm.Fv) rows.push_back(total_derivative(e, fm.max_order));
  const Program prog(rows, names);
  const auto n = static_cast<Eigen::Index>(fm.rows());
  const auto nu = static_cast<Eigen::Index>(fm.Fu.size());

  Trajectory tr = empty_trajectory(plant, fm.outputs);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * opt.dt;
    const JetPoint y = ref.jets(t, fm.max_order);
    try {
      const Vec r = to_eigen(prog.run(y.data()));
      const Vec x = r.head(2 * n);
      const Vec u = r.segment(2 * n, nu);
      const Vec ud1 = r.segment(2 * n + nu, K);
      const Vec ud2 = r.segment(2 * n + nu + K, K);
      const Vec acc = r.tail(n);
      const auto args = plant.arguments(x, u, ud1, ud2);
      tr.t.push_back(t);
      tr.x.push_back(x);
      tr.u.push_back(u);
      tr.u_d1.push_back(ud1);
      tr.u_d2.push_back(ud2);
      tr.y.push_back(plant.outputs(x, u));
      tr.iterations.push_back(0);
      tr.solve_residual.push_back(0.0);
      tr.mixed_condition.push_back(gen.mixed_condition(args));
      tr.dynamics_residual.push_back((acc - gen.rhs(args)).lpNorm<Eigen::Infinity>());
    } catch (const Error& e) {
      rethrow_at(e, t);
    }
  }
  return tr;
}

std::vector<double> fd_weights(int n, std::span<const double> nodes, double at) {
  const std::size_t N = nodes.size();
  if (n < 0 || N <= static_cast<std::size_t>(n)) throw ValidationError("stencil needs more than n nodes");
  std::vector<std::vector<double>> c(N, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - at;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < N; ++i) {
    const int mn = std::min(static_cast<int>(i), n);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - at;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      if (c3 == 0.0) throw ValidationError("stencil nodes must be distinct");
      c2 *= c3;
      if (j == i - 1) {
        for (int s = mn; s >= 1; --s) {
          c[i][s] = c1 * (s * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int s = mn; s >= 1; --s) c[j][s] = (c4 * c[j][s] - s * c[j][s - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(N);
  for (std::size_t i = 0; i < N; ++i) w[i] = c[i][static_cast<std::size_t>(n)];
  return w;
}

LinearizationReport verify_linearization(const Trajectory& traj, const MultiIndex& kappa,
                                         const ReferenceTrajectory& ref, double stencil_spacing) {
  if (kappa.size() != traj.output_names.size()) throw ValidationError("kappa has wrong length");
  LinearizationReport rep;
  rep.kappa = kappa;
  const std::size_t N = traj.size();
  const double dt = N > 1 ? traj.t[1] - traj.t[0] : 1.0;
  rep.stride = std::max(1, static_cast<int>(std::lround(stencil_spacing / dt)));
  for (std::size_t j = 0; j < kappa.size(); ++j) {
    const int d = kappa[j];
    int accuracy = d + 2;
    accuracy += accuracy % 2;
    const int half = d == 0 ? 0 : ((2 * ((d + 1) / 2) - 1 + accuracy) - 1) / 2;
    const int clip = half * rep.stride;
    rep.clipped = std::max(rep.clipped, clip);
    std::vector<double> nodes;
    for (int i = -half; i <= half; ++i) nodes.push_back(i);
    std::vector<double> weights = d == 0 ? std::vector<double>{1.0} : fd_weights(d, nodes, 0.0);
    const double hd = std::pow(rep.stride * dt, d);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = static_cast<std::size_t>(clip); i + static_cast<std::size_t>(clip) < N; ++i) {
      double deriv = 0.0;
      for (int s = -half; s <= half; ++s) {
        const auto idx = static_cast<std::size_t>(static_cast<long>(i) + static_cast<long>(s) * rep.stride);
        deriv += weights[static_cast<std::size_t>(s + half)] * traj.y[idx](static_cast<Eigen::Index>(j));
      }
      deriv /= hd;
      const double w = ref(j, d, traj.t[i]);
      err = std::max(err, std::abs(deriv - w));
      scale = std::max(scale, std::abs(w));
    }
    rep.absolute_error.push_back(err);
    rep.scale.push_back(scale);
    const double rel = scale < 1e-9 ? err : err / scale;
    rep.relative_error.push_back(rel);
    rep.max_relative_error = std::max(rep.max_relative_error, rel);
  }
  return rep;
}

double max_state_difference(const Trajectory& a, const Trajectory& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    d = std::max(d, (a.x[i] - b.x[i]).lpNorm<Eigen::Infinity>());
  }
  return d;
}

PowerBalance power_balance(const GeneralizedPlant& plant, const Trajectory& traj) {
  const auto& csf = plant.system().classical();
  PowerBalance pb;
  if (traj.size() == 0) return pb;
  std::vector<double> power(traj.size());
  double e0 = 0.0, e1 = 0.0, emax = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vec q = plant.classical_q(traj.x[i], traj.u[i]);
    const Vec v = plant.classical_v(traj.x[i], traj.u_d1[i]);
    const Vec f = plant.classical_u(traj.x[i], traj.u[i], traj.u_d1[i], traj.u_d2[i]);
    power[i] = v.dot(csf.input(q) * f);
    const double e = csf.energy(q, v);
    if (i == 0) e0 = e;
    e1 = e;
    emax = std::max(emax, std::abs(e - e0));
  }
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double h = traj.t[i] - traj.t[i - 1];
    pb.work += 0.5 * h * (power[i] + power[i - 1]);
    pb.work_magnitude += 0.5 * h * (std::abs(power[i]) + std::abs(power[i - 1]));
  }
  pb.energy_change = e1 - e0;
  const double scale = std::max({pb.work_magnitude, emax, 1e-12});
  pb.relative_error = std::abs(pb.energy_change - pb.work) / scale;
  return pb;
}

void write_csv(const Trajectory& tr, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path.string() + "'");
  f << "t";
  for (const auto& n : tr.state_names) f << "," << n;
  for (const auto& n : tr.input_names) f << "," << n;
  for (std::size_t i = 0; i < tr.promoted; ++i) f << "," << tr.input_names[i] << "_d1," << tr.input_names[i] << "_d2";
  for (const auto& n : tr.output_names) f << "," << n;
  f << ",newton_iterations,solve_residual,mixed_condition";
  const bool dyn = !tr.dynamics_residual.empty();
  if (dyn) f << ",dynamics_residual";
  f << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.12g", v);
    f << buf;
  };
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", tr.t[i]);
    f << buf;
    for (auto v : tr.x[i]) put(v);
    for (auto v : tr.u[i]) put(v);
    for (std::size_t p = 0; p < tr.promoted; ++p) {
      put(tr.u_d1[i](static_cast<Eigen::Index>(p)));
      put(tr.u_d2[i](static_cast<Eigen::Index>(p)));
    }
    for (auto v : tr.y[i]) put(v);
    f << "," << tr.iterations[i];
    put(tr.solve_residual[i]);
    put(tr.mixed_condition[i]);
    if (dyn) put(tr.dynamics_residual[i]);
    f << "\n";
  }
}

void write_plot_script(const Trajectory& tr, const std::string& csv_name, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path.string() + "'");
  const std::size_t ns = tr.state_names.size(), nu = tr.input_names.size(), ny = tr.output_names.size();
  const std::size_t first_y = 2 + ns + nu + 2 * tr.promoted;
  auto range = [&](std::size_t first, std::size_t count) {
    std::string s;
    for (std::size_t c = 0; c < count; ++c) {
      s += (c ? ", \\\n     " : "") + std::string("'") + csv_name + "' using 1:" + std::to_string(first + c) +
           " with lines title columnhead(" + std::to_string(first + c) + ")";
    }
    return s;
  };
  f << "set datafile separator ','\n"
    << "set terminal pngcairo size 1200,1000\n"
    << "set output '" << std::filesystem::path(csv_name).stem().string() << ".png'\n"
    << "set multiplot layout 3,1\n"
    << "set xlabel 't [s]'\n"
    << "set title 'state'\nplot " << range(2, ns) << "\n"
    << "set title 'input'\nplot " << range(2 + ns, nu) << "\n"
    << "set title 'flat output'\nplot " << range(first_y, ny) << "\n"
    << "unset multiplot\n";
}

}  // namespace qslin
