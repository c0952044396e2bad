#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "qslin/error.hpp"
#include "qslin/mechanics.hpp"
#include "qslin/model.hpp"

using namespace qslin;

namespace {

LagrangianSystem pendulum(double m, double l, double g) {
  LagrangianSystem s;
  s.q = {"th"};
  s.v = {"w"};
  s.u = {"tau"};
  s.metric = {{Expr::constant(m * l * l)}};
  s.potential = parse(std::to_string(m * g * l) + "*(1 - cos(th))");
  s.input_matrix = {{Expr::constant(1.0)}};
  return s;
}

const Model& manipulator() {
  static const Model model = build_model(resolve_config("builtin:manipulator"));
  return model;
}

const Model& toy() {
  static const Model model = build_model(resolve_config("builtin:toy"));
  return model;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double r = 1.0) {
  std::uniform_real_distribution<double> u(-r, r);
  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = u(rng);
  return x;
}

// Independent bias oracle from numerical derivatives of M(q) and V(q):
// c_i = sum_jk (dM_ij/dq_k - 1/2 dM_jk/dq_i) v_j v_k + dV/dq_i.
Vec bias_oracle(const ClassicalStateForm& csf, const Vec& q, const Vec& v) {
  const Eigen::Index n = q.size();
  const double h = 1e-5;
  std::vector<Mat> dM(static_cast<std::size_t>(n));
  Vec dV(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vec qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    dM[static_cast<std::size_t>(k)] = (csf.mass(qp) - csf.mass(qm)) / (2 * h);
    const Vec zero = Vec::Zero(n);
    dV(k) = (csf.energy(qp, zero) - csf.energy(qm, zero)) / (2 * h);
  }
  Vec c = dV;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        c(i) += (dM[static_cast<std::size_t>(k)](i, j) - 0.5 * dM[static_cast<std::size_t>(i)](j, k)) * v(j) * v(k);
      }
    }
  }
  return c;
}

using Field = std::function<Vec(double, const Vec&)>;

Vec rk4_step(const Field& f, double t, const Vec& x, double dt) {
  const Vec k1 = f(t, x);
  const Vec k2 = f(t + dt / 2, x + dt / 2 * k1);
  const Vec k3 = f(t + dt / 2, x + dt / 2 * k2);
  const Vec k4 = f(t + dt, x + dt * k3);
  return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

TEST_CASE("pendulum equations of motion") {
  const double m = 2.0, l = 0.5, g = 9.81;
  const ClassicalStateForm csf = euler_lagrange(pendulum(m, l, g));
  for (double th : {-1.0, 0.0, 0.3, 2.0}) {
    Vec q(1), v(1), u(1);
    q << th;
    v << 0.7;
    u << 0.4;
    CHECK(csf.bias(q, v)(0) == doctest::Approx(m * g * l * std::sin(th)).epsilon(1e-12));
    CHECK(csf.rhs(q, v, u)(0) == doctest::Approx((0.4 - m * g * l * std::sin(th)) / (m * l * l)).epsilon(1e-12));
    CHECK(csf.energy(q, v) == doctest::Approx(0.5 * m * l * l * 0.49 + m * g * l * (1 - std::cos(th))));
  }
}

TEST_CASE("free particle has no bias") {
  LagrangianSystem s;
  s.q = {"x", "z"};
  s.v = {"vx", "vz"};
  s.u = {"fx", "fz"};
  s.metric = {{Expr::constant(3.0), Expr()}, {Expr(), Expr::constant(3.0)}};
  s.input_matrix = {{Expr::constant(1.0), Expr()}, {Expr(), Expr::constant(1.0)}};
  const ClassicalStateForm csf(s);
  for (const auto& c : csf.bias()) CHECK(c.is_constant(0.0));
  Vec q(2), v(2), u(2);
  q << 1, 2;
  v << -1, 4;
  u << 6, -3;
  CHECK((csf.rhs(q, v, u) - Vec{{2.0, -1.0}}).norm() <= 1e-15);
}

TEST_CASE("system validation names the offending entry") {
  LagrangianSystem s = pendulum(1, 1, 1);
  s.metric = {{parse("th + w")}};
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("metric[1,1]"), ValidationError);
  LagrangianSystem two;
  two.q = {"a", "b"};
  two.v = {"va", "vb"};
  two.u = {"f"};
  two.metric = {{Expr::constant(1.0), parse("a")}, {parse("b"), Expr::constant(1.0)}};
  two.input_matrix = {{Expr::constant(1.0)}, {Expr()}};
  CHECK_THROWS_WITH_AS(two.validate(), doctest::Contains("metric[1,2]"), ValidationError);
  two.metric[1][0] = parse("a");
  CHECK_NOTHROW(two.validate());
  two.u = {"a"};
  CHECK_THROWS_WITH_AS(two.validate(), doctest::Contains("duplicate"), ValidationError);
}

TEST_CASE("manipulator bias matches numerical Euler-Lagrange derivatives") {
  const auto& csf = manipulator().csf();
  std::mt19937_64 rng(3);
  for (int n = 0; n < 20; ++n) {
    const Vec q = random_vec(rng, 4, 1.5), v = random_vec(rng, 4, 2.0);
    const Vec want = bias_oracle(csf, q, v);
    CHECK((csf.bias(q, v) - want).lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + want.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("toy bias matches numerical Euler-Lagrange derivatives") {
  const auto& csf = toy().csf();
  std::mt19937_64 rng(4);
  for (int n = 0; n < 20; ++n) {
    const Vec q = random_vec(rng, 2, 2.0), v = random_vec(rng, 2, 2.0);
    const Vec want = bias_oracle(csf, q, v);
    CHECK((csf.bias(q, v) - want).lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + want.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("explicit and implicit forms agree") {
  std::mt19937_64 rng(5);
  for (const Model* md : {&manipulator(), &toy()}) {
    const auto& csf = md->csf();
    const auto p = static_cast<Eigen::Index>(csf.system().p());
    const auto m = static_cast<Eigen::Index>(csf.system().m());
    for (int n = 0; n < 20; ++n) {
      const Vec q = random_vec(rng, p), v = random_vec(rng, p), u = random_vec(rng, m, 10.0);
      const Vec a = csf.rhs(q, v, u);
      CHECK(csf.implicit_residual(q, v, a, u).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }
}

TEST_CASE("manipulator hover equilibrium") {
  const auto& csf = manipulator().csf();
  const double M = 1.5, g = 9.81;
  for (double theta : {0.0, 0.3, -0.5}) {
    Vec q0(4), u0(3);
    q0 << 0.1, 0.2, theta, -1.4 - theta;
    u0 << 7, 7, 0;
    const auto eq = find_equilibrium(csf, q0, u0, {{"x_e", 0.1}, {"z_e", 0.2}, {"theta", theta}});
    INFO("theta = " << theta);
    CHECK(eq.residual <= 1e-9);
    CHECK(eq.u(0) + eq.u(1) == doctest::Approx(M * g).epsilon(1e-10));
    CHECK(eq.q(2) + eq.q(3) == doctest::Approx(-M_PI / 2).epsilon(1e-10));
    CHECK(csf.rhs(eq.q, Vec::Zero(4), eq.u).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
  CHECK_THROWS_AS(find_equilibrium(csf, Vec::Zero(4), Vec::Zero(3), {{"nope", 1.0}}), ValidationError);
}

TEST_CASE("promotion structure") {
  const auto& gen = manipulator().gen();
  CHECK(gen.k() == 1);
  CHECK(gen.q() == std::vector<std::string>{"x_e", "z_e", "theta"});
  CHECK(gen.v() == std::vector<std::string>{"v_xe", "v_ze", "w_theta"});
  CHECK(gen.u() == std::vector<std::string>{"phi", "F1", "F2"});
  CHECK(gen.input_args() == std::vector<std::string>{"phi", "phi_d1", "phi_d2", "F1", "F2"});
  CHECK(gen.B() == MultiIndex{2, 0, 0});
  CHECK(gen.rhs().size() == 3);
  CHECK(gen.eliminated_forces().size() == 1);
  CHECK_THROWS_AS(promote(manipulator().csf(), {{2, 3}, {2, 2}}), ValidationError);
  CHECK_THROWS_AS(promote(manipulator().csf(), {{0, 3}, {1, 3}}), ValidationError);
}

TEST_CASE("promotion with k = 0 reproduces the classical form") {
  const auto& csf = manipulator().csf();
  const GeneralizedSystem gen = promote(csf, {});
  CHECK(gen.k() == 0);
  CHECK(gen.u() == csf.system().u);
  std::mt19937_64 rng(6);
  for (int n = 0; n < 10; ++n) {
    const Vec q = random_vec(rng, 4), v = random_vec(rng, 4), u = random_vec(rng, 3, 10.0);
    std::vector<double> args(q.data(), q.data() + 4);
    args.insert(args.end(), v.data(), v.data() + 4);
    args.insert(args.end(), u.data(), u.data() + 3);
    CHECK((gen.rhs(args) - csf.rhs(q, v, u)).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("generalized dynamics with the eliminated force satisfy the classical equations") {
  const auto& csf = manipulator().csf();
  const auto& gen = manipulator().gen();
  std::mt19937_64 rng(8);
  for (int n = 0; n < 20; ++n) {
    const Vec qt = random_vec(rng, 3), vt = random_vec(rng, 3), ia = random_vec(rng, 5);
    std::vector<double> args(qt.data(), qt.data() + 3);
    args.insert(args.end(), vt.data(), vt.data() + 3);
    args.insert(args.end(), ia.data(), ia.data() + 5);
    const Vec f = gen.rhs(args);
    const Vec tau = gen.eliminated_forces(args);
    Vec q(4), v(4), a(4), u(3);
    q << qt, ia(0);
    v << vt, ia(1);
    a << f, ia(2);
    u << ia(3), ia(4), tau(0);
    CHECK(csf.implicit_residual(q, v, a, u).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("energy is conserved without inputs") {
  for (const Model* md : {&manipulator(), &toy()}) {
    const auto& csf = md->csf();
    const auto p = static_cast<Eigen::Index>(csf.system().p());
    const Vec u = Vec::Zero(static_cast<Eigen::Index>(csf.system().m()));
    const Field f = [&](double, const Vec& x) {
      Vec dx(2 * p);
      dx << x.tail(p), csf.rhs(x.head(p), x.tail(p), u);
      return dx;
    };
    std::mt19937_64 rng(9);
    const Vec x0 = random_vec(rng, 2 * p, 0.5);
    const double e0 = csf.energy(x0.head(p), x0.tail(p));
    auto drift = [&](double dt) {
      Vec x = x0;
      double worst = 0.0;
      const int steps = static_cast<int>(std::lround(2.0 / dt));
      for (int i = 0; i < steps; ++i) {
        x = rk4_step(f, i * dt, x, dt);
        worst = std::max(worst, std::abs(csf.energy(x.head(p), x.tail(p)) - e0));
      }
      return worst;
    };
    // The drift is RK4 truncation error: small, and shrinking at fourth order.
    const double coarse = drift(1e-3), fine = drift(5e-4);
    INFO("drift " << coarse << " -> " << fine);
    CHECK(coarse <= 1e-6 * (1.0 + std::abs(e0)));
    CHECK((fine <= coarse / 10 || fine <= 1e-12));
  }
}

TEST_CASE("classical simulation driven by reconstructed forces reproduces a generalized trajectory") {
  const auto& csf = manipulator().csf();
  const auto& gen = manipulator().gen();
  // Promoted coordinate and remaining forces as smooth functions of time.
  auto phi = [](double t, int d) {
    const double w = 2.0;
    const double s = std::sin(w * t), c = std::cos(w * t);
    if (d == 0) return -M_PI / 2 + 0.1 * s;
    if (d == 1) return 0.1 * w * c;
    return -0.1 * w * w * s;
  };
  auto forces = [](double t) { return Vec{{7.4 + 0.3 * std::sin(t), 7.3 - 0.2 * std::cos(3 * t)}}; };
  auto args_at = [&](double t, const Vec& x) {
    std::vector<double> a(x.data(), x.data() + 6);
    a.push_back(phi(t, 0));
    a.push_back(phi(t, 1));
    a.push_back(phi(t, 2));
    const Vec f = forces(t);
    a.push_back(f(0));
    a.push_back(f(1));
    return a;
  };
  const Field fg = [&](double t, const Vec& x) {
    Vec dx(6);
    dx << x.tail(3), gen.rhs(args_at(t, x));
    return dx;
  };
  // The classical run reads its torque from the generalized state at the same stage time.
  Vec xg(6);
  xg << 0.0, -0.13, 0.0, 0.0, 0.0, 0.0;
  Vec xc(8);
  xc << xg.head(3), phi(0, 0), xg.tail(3), phi(0, 1);
  const double dt = 1e-3;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double t = i * dt;
    const Vec xg_start = xg;
    const Field fc = [&](double s, const Vec& x) {
      // Generalized state at stage time s by a matching RK4 sub-step.
      const Vec xs = s == t ? xg_start : rk4_step(fg, t, xg_start, s - t);
      const Vec tau = gen.eliminated_forces(args_at(s, xs));
      const Vec f = forces(s);
      Vec u(3);
      u << f(0), f(1), tau(0);
      Vec dx(8);
      dx << x.tail(4), csf.rhs(x.head(4), x.tail(4), u);
      return dx;
    };
    xc = rk4_step(fc, t, xc, dt);
    xg = rk4_step(fg, t, xg, dt);
    Vec expect(8);
    expect << xg.head(3), phi(t + dt, 0), xg.tail(3), phi(t + dt, 1);
    worst = std::max(worst, (xc - expect).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-6);
}
