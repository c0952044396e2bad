#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qslin/error.hpp"
#include "qslin/model.hpp"
#include "qslin/sim.hpp"

using namespace qslin;

namespace {

const Model& manipulator() {
  static const Model model = build_model(resolve_config("builtin:manipulator"));
  return model;
}

const GeneralizedPlant& plant() {
  static const GeneralizedPlant p(manipulator().gen(), manipulator().phi);
  return p;
}

const std::vector<double> kStart{0, 0, 0}, kEnd{1, 0.5, 0.4};

ReferenceTrajectory transition(double T = 5.0) {
  return plan_rest_to_rest(manipulator().gen(), manipulator().generalized, kStart, kEnd, T);
}

Vec target_state(const std::vector<double>& y) {
  const auto ep = equilibrium_point(manipulator(), y);
  Vec x = Vec::Zero(6);
  x.head(3) = ep.q_tilde;
  return x;
}

struct Run {
  Trajectory closed, rollout;
  LinearizationReport lin;
};

Run run(const MultiIndex& kappa, const SimOptions& opt, const Vec* offset = nullptr) {
  const auto ref = transition(opt.T);
  Run r;
  r.rollout = flat_side_rollout(plant(), manipulator().generalized, ref, opt);
  Vec x0 = r.rollout.x.front();
  if (offset) x0 += *offset;
  const FeedbackLaw law(manipulator().generalized, kappa);
  r.closed = simulate_closed_loop(plant(), law, ref, x0, opt);
  r.lin = verify_linearization(r.closed, kappa, ref);
  return r;
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

}  // namespace

TEST_CASE("transition profile") {
  const auto c2 = transition_coefficients(2);
  const std::vector<double> want{0, 0, 0, 10, -15, 6};
  REQUIRE(c2.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(c2[i] == doctest::Approx(want[i]).epsilon(1e-14));
  for (double tau : {0.1, 0.37, 0.5, 0.9}) {
    CHECK(transition_profile(tau, 0, 2) ==
          doctest::Approx(6 * std::pow(tau, 5) - 15 * std::pow(tau, 4) + 10 * std::pow(tau, 3)));
  }
  for (int b : {1, 2, 3, 5, 7}) {
    CHECK(transition_profile(0.0, 0, b) == 0.0);
    CHECK(transition_profile(1.0, 0, b) == doctest::Approx(1.0).epsilon(1e-15));
    for (int n = 1; n <= b; ++n) {
      CHECK(std::abs(transition_profile(0.0, n, b)) <= 1e-12);
      CHECK(std::abs(transition_profile(1.0, n, b)) <= 1e-12);
    }
    // The profile is held constant from tau = 1 on; probe the next derivative just inside.
    CHECK(std::abs(transition_profile(1.0 - 1e-12, b + 1, b)) > 1.0);
    for (double tau : {0.13, 0.42, 0.77}) {
      CHECK(transition_profile(tau, 0, b) + transition_profile(1.0 - tau, 0, b) == doctest::Approx(1.0));
    }
  }
  CHECK(transition_profile(-0.5, 0, 5) == 0.0);
  CHECK(transition_profile(1.5, 0, 5) == 1.0);
  CHECK(transition_profile(1.5, 2, 5) == 0.0);
  CHECK_THROWS_AS(transition_coefficients(-1), ValidationError);
}

TEST_CASE("reference trajectory endpoints") {
  const auto ref = transition();
  CHECK(ref.duration() == 5.0);
  CHECK(ref.boundary_order() == 5);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(ref(j, 0, 0.0) == kStart[j]);
    CHECK(ref(j, 0, 5.0) == doctest::Approx(kEnd[j]).epsilon(1e-14));
    for (int n = 1; n <= 5; ++n) {
      CHECK(std::abs(ref(j, n, 0.0)) <= 1e-12);
      CHECK(std::abs(ref(j, n, 5.0)) <= 1e-12);
    }
  }
  const JetPoint y = ref.jets(2.5, 6);
  CHECK(y(1, 0) == doctest::Approx(0.25));
  // Derivatives are consistent with differences of the values.
  const double h = 1e-5;
  CHECK(ref(0, 1, 1.3) == doctest::Approx((ref(0, 0, 1.3 + h) - ref(0, 0, 1.3 - h)) / (2 * h)).epsilon(1e-8));
  CHECK_THROWS_AS(ReferenceTrajectory({0}, {1, 2}, 1.0, 5), ValidationError);
  CHECK_THROWS_AS(plan_rest_to_rest(manipulator().gen(), manipulator().generalized, {0, 0}, {1, 1}, 5.0),
                  ValidationError);
}

TEST_CASE("finite-difference weights") {
  const std::vector<double> three{-1, 0, 1};
  const auto w2 = fd_weights(2, three, 0.0);
  CHECK(w2[0] == doctest::Approx(1.0));
  CHECK(w2[1] == doctest::Approx(-2.0));
  CHECK(w2[2] == doctest::Approx(1.0));
  const auto w1 = fd_weights(1, three, 0.0);
  CHECK(w1[0] == doctest::Approx(-0.5));
  CHECK(w1[1] == doctest::Approx(0.0));
  CHECK(w1[2] == doctest::Approx(0.5));
  // Exact for polynomials up to degree N - 1 on uneven nodes.
  const std::vector<double> nodes{-0.3, 0.1, 0.4, 0.9, 1.7, 2.2};
  for (int n = 0; n <= 4; ++n) {
    const auto w = fd_weights(n, nodes, 0.5);
    for (int deg = 0; deg <= 5; ++deg) {
      double got = 0.0;
      for (std::size_t i = 0; i < nodes.size(); ++i) got += w[i] * std::pow(nodes[i], deg);
      double want = 0.0;
      if (deg >= n) {
        want = 1.0;
        for (int k = 0; k < n; ++k) want *= deg - k;
        want *= std::pow(0.5, deg - n);
      }
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(fd_weights(3, three, 0.0), ValidationError);
  const std::vector<double> dup{0, 0, 1};
  CHECK_THROWS_AS(fd_weights(1, dup, 0.0), ValidationError);
}

TEST_CASE("constant reference at equilibrium keeps the state constant") {
  const auto& md = manipulator();
  const auto ref = plan_rest_to_rest(md.gen(), md.generalized, {0.2, -0.1, 0.3}, {0.2, -0.1, 0.3}, 2.0);
  SimOptions opt;
  opt.T = 2.0;
  const FeedbackLaw law(md.generalized, MultiIndex{0, 2, 4});
  const Vec x0 = target_state({0.2, -0.1, 0.3});
  const auto tr = simulate_closed_loop(plant(), law, ref, x0, opt);
  CHECK(tr.size() == 2001);
  double drift = 0.0;
  for (const auto& x : tr.x) drift = std::max(drift, (x - x0).lpNorm<Eigen::Infinity>());
  CHECK(drift <= 1e-10);
}

TEST_CASE("flat-side rollout satisfies the generalized dynamics") {
  SimOptions opt;
  const auto roll = flat_side_rollout(plant(), manipulator().generalized, transition(), opt);
  CHECK(roll.size() == 5001);
  CHECK(roll.t.back() == doctest::Approx(5.0));
  CHECK(max_of(roll.dynamics_residual) <= 1e-6);
  CHECK((roll.x.front() - target_state(kStart)).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((roll.x.back() - target_state(kEnd)).lpNorm<Eigen::Infinity>() <= 1e-9);
  // The flat output of the rollout is the reference itself.
  const auto ref = transition();
  double err = 0.0;
  for (std::size_t i = 0; i < roll.size(); i += 97) {
    for (std::size_t j = 0; j < 3; ++j) err = std::max(err, std::abs(roll.y[i](j) - ref(j, 0, roll.t[i])));
  }
  CHECK(err <= 1e-12);
}

TEST_CASE("closed loop realizes the chains for both candidates") {
  for (const MultiIndex& kappa : {MultiIndex{2, 2, 2}, MultiIndex{0, 2, 4}}) {
    INFO(kappa.str());
    SimOptions opt;
    const Run r = run(kappa, opt);
    CHECK(r.lin.max_relative_error <= 1e-3);
    for (double e : r.lin.relative_error) CHECK(e <= 1e-3);
    CHECK((r.closed.x.back() - target_state(kEnd)).lpNorm<Eigen::Infinity>() <= 1e-5);
    CHECK(max_state_difference(r.closed, r.rollout) <= 1e-4);
    CHECK(max_of(r.closed.solve_residual) <= 1e-9);
    const auto pb = power_balance(plant(), r.closed);
    CHECK(pb.relative_error <= 1e-4);
    CHECK(pb.energy_change > 1.0);
  }
}

TEST_CASE("closed loop with numerical input derivatives") {
  for (const MultiIndex& kappa : {MultiIndex{2, 2, 2}, MultiIndex{0, 2, 4}}) {
    INFO(kappa.str());
    SimOptions opt;
    opt.strategy = "numeric";
    const Run r = run(kappa, opt);
    CHECK(r.lin.max_relative_error <= 1e-3);
    CHECK((r.closed.x.back() - target_state(kEnd)).lpNorm<Eigen::Infinity>() <= 1e-5);
    CHECK(max_state_difference(r.closed, r.rollout) <= 1e-4);
  }
}

TEST_CASE("perturbed start keeps the chains") {
  SimOptions opt;
  Vec d1 = Vec::Zero(6);
  d1.head(3).setConstant(1e-3);
  const Run r1 = run(MultiIndex{2, 2, 2}, opt, &d1);
  CHECK(r1.lin.max_relative_error <= 1e-2);
  // For (0,2,4) an x_e offset leaves y1 free of any chain; offset z_e and theta.
  Vec d2 = Vec::Zero(6);
  d2(1) = 1e-3;
  d2(2) = 1e-3;
  const Run r2 = run(MultiIndex{0, 2, 4}, opt, &d2);
  CHECK(r2.lin.max_relative_error <= 1e-2);
}

TEST_CASE("power balance on the rollout") {
  SimOptions opt;
  const auto roll = flat_side_rollout(plant(), manipulator().generalized, transition(), opt);
  const auto pb = power_balance(plant(), roll);
  CHECK(pb.relative_error <= 1e-4);
  CHECK(pb.work == doctest::Approx(pb.energy_change).epsilon(1e-4));
}

TEST_CASE("verification stencil layout") {
  SimOptions opt;
  opt.T = 1.0;
  const auto ref = transition(1.0);
  const auto roll = flat_side_rollout(plant(), manipulator().generalized, ref, opt);
  const auto lin = verify_linearization(roll, MultiIndex{0, 2, 4}, ref);
  CHECK(lin.stride == 10);
  CHECK(lin.clipped == 40);  // accuracy 6 for the fourth derivative: 4 nodes each side
  CHECK(lin.max_relative_error <= 1e-3);
  CHECK_THROWS_AS(verify_linearization(roll, MultiIndex{2, 2}, ref), ValidationError);
}

TEST_CASE("singular transitions fail with the time of failure") {
  // z drops 5 m in 1 s: the required acceleration exceeds gravity and the rotor
  // flips over. The rollout follows the flip; the (0,2,4) law loses regularity.
  const auto& md = manipulator();
  const auto ref = plan_rest_to_rest(md.gen(), md.generalized, kStart, {0, -5, 0}, 1.0);
  SimOptions opt;
  opt.T = 1.0;
  const auto roll = flat_side_rollout(plant(), md.generalized, ref, opt);
  CHECK(max_of(roll.dynamics_residual) <= 1e-6);
  const FeedbackLaw k2(md.generalized, MultiIndex{0, 2, 4});
  CHECK_THROWS_WITH_AS(simulate_closed_loop(plant(), k2, ref, roll.x.front(), opt), doctest::Contains("at t = "),
                       NumericError);
  SimOptions bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(flat_side_rollout(plant(), md.generalized, transition(), bad), ValidationError);
  bad = SimOptions{};
  bad.strategy = "euler";
  const FeedbackLaw law(md.generalized, MultiIndex{2, 2, 2});
  CHECK_THROWS_AS(simulate_closed_loop(plant(), law, transition(), target_state(kStart), bad), ValidationError);
}

TEST_CASE("csv and plot script") {
  SimOptions opt;
  opt.T = 0.1;
  const auto ref = transition(0.1);
  const auto roll = flat_side_rollout(plant(), manipulator().generalized, ref, opt);
  const auto dir = std::filesystem::temp_directory_path() / "qslin_test_sim";
  std::filesystem::create_directories(dir);
  write_csv(roll, dir / "r.csv");
  write_plot_script(roll, "r.csv", dir / "r.gp");
  std::ifstream f(dir / "r.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header.rfind("t,x_e,z_e,theta,v_xe,v_ze,w_theta,phi,F1,F2", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(f, line);) ++rows;
  CHECK(rows == 101);
  std::ifstream g(dir / "r.gp");
  const std::string script((std::istreambuf_iterator<char>(g)), {});
  CHECK(script.find("r.csv") != std::string::npos);
  std::filesystem::remove_all(dir);
}
