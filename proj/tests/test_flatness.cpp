#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/SVD>

#include "qslin/error.hpp"
#include "qslin/flatness.hpp"
#include "qslin/model.hpp"

using namespace qslin;

namespace {

const Model& manipulator() {
  static const Model model = build_model(resolve_config("builtin:manipulator"));
  return model;
}

const Model& toy() {
  static const Model model = build_model(resolve_config("builtin:toy"));
  return model;
}

// Regularity decided directly from the singular values, as the oracle.
bool regular_by_svd(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  const auto& s = svd.singularValues();
  return s.size() > 0 && s(s.size() - 1) > 1e-8 * s(0);
}

// Every kappa <= R with sum n_target, by odometer.
std::vector<MultiIndex> all_kappa(const MultiIndex& R, int n_target) {
  std::vector<MultiIndex> out;
  MultiIndex k(R.size(), 0);
  while (true) {
    if (k.sum() == n_target) out.push_back(k);
    std::size_t j = 0;
    while (j < k.size() && k[j] == R[j]) k[j++] = 0;
    if (j == k.size()) break;
    ++k[j];
  }
  return out;
}

std::set<MultiIndex> brute_force(const FlatMap& fm, const JetPoint& y_s) {
  std::set<MultiIndex> out;
  for (const auto& k : all_kappa(fm.R, 2 * static_cast<int>(fm.rows()))) {
    if (regular_by_svd(regularity_matrix(fm, k, y_s))) out.insert(k);
  }
  return out;
}

std::set<MultiIndex> emitted(const FlatMap& fm, const JetPoint& y_s) {
  std::set<MultiIndex> out;
  for (const auto& c : enumerate_kappa(fm, y_s)) out.insert(c.kappa);
  return out;
}

// Relabels flat outputs: output j becomes perm[j].
FlatMap permute_outputs(const FlatMap& fm, const std::vector<std::size_t>& perm) {
  Substitution s;
  for (std::size_t j = 0; j < fm.outputs; ++j) {
    for (int a = 0; a <= fm.max_order; ++a) s[jet_name(j, a)] = Expr::variable(jet_name(perm[j], a));
  }
  FlatMap out = fm;
  for (auto* rows : {&out.Fq, &out.Fv, &out.Fu}) {
    for (auto& e : *rows) e = substitute(e, s);
  }
  for (std::size_t j = 0; j < fm.outputs; ++j) {
    out.R[perm[j]] = fm.R[j];
    out.S[perm[j]] = fm.S[j];
  }
  return out;
}

MultiIndex permute(const MultiIndex& k, const std::vector<std::size_t>& perm) {
  MultiIndex out(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) out[perm[j]] = k[j];
  return out;
}

}  // namespace

TEST_CASE("manipulator flat map certificate and orders") {
  const auto& md = manipulator();
  CHECK(md.certificate.points == 50);
  CHECK(md.certificate.max_residual <= 1e-8);
  CHECK(md.certificate.max_output_error <= 1e-10);
  CHECK(scan_R(md.generalized) == MultiIndex{4, 4, 4});
  CHECK(scan_S(md.generalized) == MultiIndex{4, 4, 4});
  CHECK(md.generalized.R == MultiIndex{4, 4, 4});
  CHECK(md.generalized.S == MultiIndex{4, 4, 4});
  CHECK(md.classical.R == MultiIndex{4, 4, 4});
  CHECK(md.generalized.generalized);
  CHECK(md.generalized.rows() == 3);
  CHECK(md.generalized.u_names == std::vector<std::string>{"phi", "F1", "F2"});
}

TEST_CASE("generalized maps use the expected jet arguments") {
  const auto& fm = manipulator().generalized;
  // x_e, z_e use the accelerations of y1, y2 and the heading up to y3_d2; theta = y3.
  CHECK(highest_orders(fm.Fq[0], 3) == MultiIndex{2, 2, 2});
  CHECK(highest_orders(fm.Fq[1], 3) == MultiIndex{2, 2, 2});
  CHECK(highest_orders(fm.Fq[2], 3) == MultiIndex{-1, -1, 0});
  CHECK(highest_orders(fm.Fu, 3) == MultiIndex{4, 4, 4});
  // The promoted coordinate is the phi row of F_q.
  CHECK(highest_orders(fm.Fu[0], 3) == MultiIndex{2, 2, 2});
}

TEST_CASE("equilibrium Jacobian structure over random headings") {
  const auto& md = manipulator();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> heading(-1.2, 1.2), pos(-2.0, 2.0);
  for (int n = 0; n < 10; ++n) {
    const std::vector<double> y0{pos(rng), pos(rng), heading(rng)};
    const auto rep = equilibrium_jacobian(md.generalized, md.equilibrium(y0));
    INFO("y_s = (" << y0[0] << ", " << y0[1] << ", " << y0[2] << ")");
    CHECK((rep.Q[0] - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-9);
    const Mat& q2 = rep.Q[2];
    for (Eigen::Index i = 0; i < 3; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) {
        if (i == 0 && j != 1) continue;
        CHECK(std::abs(q2(i, j)) <= 1e-9);
      }
    }
    CHECK(std::abs(q2(0, 0)) > 1e-6);
    CHECK(std::abs(q2(0, 2)) > 1e-6);
    CHECK(rep.rank_Q2 <= 1);
  }
}

TEST_CASE("classical equilibrium Jacobian structure: manipulator and toy") {
  for (const Model* md : {&manipulator(), &toy()}) {
    INFO(md->config.name);
    const auto rep = equilibrium_jacobian(md->classical, md->y_s);
    const auto check = verify_equilibrium_structure(rep);
    CHECK(check.pass);
    CHECK(check.diagnostics.empty());
    CHECK(rep.max_zero_block <= 1e-9);
    CHECK(rep.max_velocity_mismatch <= 1e-9);
    CHECK(rep.max_velocity_zero_block <= 1e-9);
    CHECK(rep.rank_Q0 == static_cast<int>(md->system.p()) - (md->system.p() > md->system.m() ? 1 : 0));
    CHECK(rep.rank_Q2 <= 1);
  }
  CHECK(equilibrium_jacobian(manipulator().classical, manipulator().y_s).rank_Q0 == 3);
}

TEST_CASE("structure check rejects a corrupted configuration map") {
  FlatMap bad = manipulator().classical;
  const Expr extra = Expr::constant(0.5) * Expr::variable("y1_d1");
  bad.Fq[0] = bad.Fq[0] + extra;
  bad.Fv[0] = bad.Fv[0] + total_derivative(extra);
  const auto rep = equilibrium_jacobian(bad, manipulator().y_s);
  CHECK(rep.max_zero_block == doctest::Approx(0.5));
  const auto check = verify_equilibrium_structure(rep);
  CHECK_FALSE(check.pass);
  CHECK_FALSE(check.diagnostics.empty());

  FlatMap rank_loss = manipulator().classical;
  rank_loss.Fq[1] = rank_loss.Fq[0];
  rank_loss.Fv[1] = rank_loss.Fv[0];
  CHECK_FALSE(verify_equilibrium_structure(equilibrium_jacobian(rank_loss, manipulator().y_s)).pass);
}

TEST_CASE("a parameterization that violates the dynamics is rejected") {
  ProjectConfig cfg = resolve_config("builtin:manipulator");
  cfg.Fq[3] = "atan2(-(acc2 + g), -acc1) - y3 + 0.01*y1";
  CHECK_THROWS_AS(build_model(cfg), MathConditionError);
}

TEST_CASE("manipulator candidates") {
  const auto& md = manipulator();
  const auto cands = enumerate_kappa(md.generalized, md.y_s);
  REQUIRE(cands.size() == 2);
  CHECK(cands[0].kappa == MultiIndex{2, 2, 2});
  CHECK(cands[0].case_name() == "i");
  CHECK(cands[0].subset == std::vector<std::size_t>{0, 1, 2});
  CHECK_FALSE(cands[0].column);
  CHECK(cands[1].kappa == MultiIndex{0, 2, 4});
  CHECK(cands[1].case_name() == "ii");
  CHECK(cands[1].subset == std::vector<std::size_t>{1, 2});
  REQUIRE(cands[1].column);
  CHECK(*cands[1].column == 2);
  for (const auto& c : cands) {
    CHECK(c.kappa.sum() == 6);
    CHECK(c.kappa.leq(md.generalized.R));
    CHECK(c.margin > 0.0);
  }
}

TEST_CASE("regularity examples") {
  const auto& md = manipulator();
  const auto ok = check_regularity(md.generalized, MultiIndex{2, 2, 2}, md.y_s);
  CHECK(ok.regular);
  CHECK(ok.samples == 20);
  CHECK(ok.sigma_min_at_equilibrium > 0.1);
  CHECK(ok.sigma_min_over_ball > 0.1);
  const auto bad = check_regularity(md.generalized, MultiIndex{4, 2, 0}, md.y_s);
  CHECK_FALSE(bad.regular);
  CHECK(bad.sigma_min_at_equilibrium <= 1e-12);
  CHECK(regularity_columns(MultiIndex{0, 2, 4}) ==
        std::vector<std::string>{"y2", "y2_d1", "y3", "y3_d1", "y3_d2", "y3_d3"});
  const Mat r = regularity_matrix(md.generalized, MultiIndex{0, 2, 4}, md.y_s);
  CHECK(r.rows() == 6);
  CHECK(r.cols() == 6);
}

TEST_CASE("enumeration agrees with brute force over every admissible length") {
  const auto& md = manipulator();
  const auto all = all_kappa(md.generalized.R, 6);
  CHECK(all.size() == 19);
  const auto brute = brute_force(md.generalized, md.y_s);
  CHECK(brute == std::set<MultiIndex>{MultiIndex{2, 2, 2}, MultiIndex{0, 2, 4}});
  CHECK(emitted(md.generalized, md.y_s) == brute);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 0; n < 5; ++n) {
    const JetPoint y = md.equilibrium(std::vector<double>{u(rng), u(rng), u(rng)});
    CHECK(emitted(md.generalized, y) == brute_force(md.generalized, y));
  }
}

TEST_CASE("toy: fully actuated, only (2,2)") {
  const auto& md = toy();
  CHECK(md.generalized.R == MultiIndex{2, 2});
  CHECK(md.generalized.S == MultiIndex{2, 2});
  CHECK(md.gen().k() == 0);
  const auto cands = enumerate_kappa(md.generalized, md.y_s);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].kappa == MultiIndex{2, 2});
  CHECK(cands[0].case_name() == "i");
  CHECK(brute_force(md.generalized, md.y_s) == emitted(md.generalized, md.y_s));
}

TEST_CASE("candidates follow a relabeling of the flat outputs") {
  const auto& md = manipulator();
  const std::vector<std::vector<std::size_t>> perms{{1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}};
  const auto base = emitted(md.generalized, md.y_s);
  for (const auto& perm : perms) {
    const FlatMap fm = permute_outputs(md.generalized, perm);
    std::vector<double> y0(3);
    for (std::size_t j = 0; j < 3; ++j) y0[perm[j]] = md.config.equilibrium[j];
    const JetPoint y = make_equilibrium(y0, fm.max_order);
    std::set<MultiIndex> want;
    for (const auto& k : base) want.insert(permute(k, perm));
    CHECK(emitted(fm, y) == want);
  }
}

TEST_CASE("ball sampling stays within the radius") {
  std::mt19937_64 rng(2);
  const JetPoint c = manipulator().y_s;
  for (int n = 0; n < 20; ++n) {
    const JetPoint s = sample_ball(c, 0.01, rng);
    double r2 = 0.0;
    for (std::size_t i = 0; i < s.data().size(); ++i) r2 += std::pow(s.data()[i] - c.data()[i], 2);
    CHECK(std::sqrt(r2) <= 0.01 + 1e-15);
  }
}
