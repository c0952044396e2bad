#include "qslin/report.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "qslin/error.hpp"

namespace qslin {

namespace {

Json matrix_json(const Mat& a) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.push_back(a(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Json vector_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json multi_index_json(const MultiIndex& a) { return a.values(); }

// Jet variables used by a list of expressions, ordered by output then order.
std::vector<std::string> jet_arguments(const std::vector<Expr>& rows) {
  std::set<std::pair<std::size_t, int>> used;
  for (const auto& e : rows) {
    for (const auto& v : free_variables(e)) {
      if (auto jv = parse_jet_name(v)) used.emplace(jv->output, jv->order);
    }
  }
  std::vector<std::string> out;
  for (const auto& [j, a] : used) out.push_back(jet_name(j, a));
  return out;
}

std::vector<std::string> order_names(std::size_t m, int a) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < m; ++j) out.push_back(jet_name(j, a));
  return out;
}

Json flat_map_json(const FlatMap& fm) {
  Json j;
  j["R"] = multi_index_json(fm.R);
  j["S"] = multi_index_json(fm.S);
  j["state_names"] = fm.q_names;
  j["input_names"] = fm.u_names;
  j["Fq_arguments"] = jet_arguments(fm.Fq);
  j["Fv_arguments"] = jet_arguments(fm.Fv);
  j["Fu_arguments"] = jet_arguments(fm.Fu);
  return j;
}

Json jacobian_json(const EquilibriumJacobianReport& rep, std::size_t m) {
  Json j;
  j["columns_Q0"] = order_names(m, 0);
  j["Q0"] = matrix_json(rep.Q[0]);
  j["columns_Q2"] = order_names(m, 2);
  j["Q2"] = matrix_json(rep.Q[2]);
  j["rank_Q0"] = rep.rank_Q0;
  j["rank_Q2"] = rep.rank_Q2;
  j["max_zero_block"] = rep.max_zero_block;
  j["max_velocity_mismatch"] = rep.max_velocity_mismatch;
  j["max_velocity_zero_block"] = rep.max_velocity_zero_block;
  return j;
}

void write_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
}

std::string candidate_label(std::size_t i, const KappaCandidate& c) {
  return std::to_string(i + 1) + " " + c.kappa.str();
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

}  // namespace

Json analyze_report(const Model& model) {
  const std::size_t m = model.outputs();
  Json r;
  r["name"] = model.config.name;
  Json sys;
  sys["p"] = model.system.p();
  sys["m"] = model.system.m();
  sys["k"] = model.gen().k();
  sys["coordinates"] = model.system.q;
  sys["inputs"] = model.system.u;
  Json pairs = Json::array();
  for (const auto& [u, q] : model.config.promotion) pairs.push_back(u + ":" + q);
  sys["promotion"] = pairs;
  sys["B"] = multi_index_json(model.gen().B());
  r["system"] = sys;

  Json cert;
  cert["max_residual"] = model.certificate.max_residual;
  cert["max_output_error"] = model.certificate.max_output_error;
  cert["points"] = model.certificate.points;
  cert["force_rows"] = model.certificate.force_rows;
  r["certificate"] = cert;
  r["classical"] = flat_map_json(model.classical);
  r["generalized"] = flat_map_json(model.generalized);

  const auto eq = equilibrium_point(model, model.config.equilibrium);
  Json e;
  e["y"] = model.config.equilibrium;
  e["q"] = vector_json(eq.q);
  e["u"] = vector_json(eq.u);
  e["q_tilde"] = vector_json(eq.q_tilde);
  e["u_tilde"] = vector_json(eq.u_tilde);
  e["residual"] = eq.residual;
  r["equilibrium"] = e;

  const auto classical = equilibrium_jacobian(model.classical, model.y_s);
  const auto check = verify_equilibrium_structure(classical);
  Json l;
  l["pass"] = check.pass;
  l["diagnostics"] = check.diagnostics;
  l["jacobian"] = jacobian_json(classical, m);
  r["structure"] = l;
  r["generalized_jacobian"] = jacobian_json(equilibrium_jacobian(model.generalized, model.y_s), m);
  return r;
}

std::vector<KappaCandidate> model_candidates(const Model& model) {
  KappaOptions ko;
  ko.rank_tol = model.config.solver.rank_tol;
  return enumerate_kappa(model.generalized, model.y_s, ko);
}

Json kappa_report(const Model& model, const std::vector<KappaCandidate>& candidates) {
  const auto& sv = model.config.solver;
  RegularityOptions ro;
  ro.samples = sv.samples;
  ro.radius = sv.sample_radius;
  ro.seed = sv.seed;
  ro.rank_tol = sv.rank_tol;
  Json r;
  r["name"] = model.config.name;
  r["R"] = multi_index_json(model.generalized.R);
  r["target_length"] = 2 * model.generalized.rows();
  r["equilibrium"] = model.config.equilibrium;
  r["sample_radius"] = sv.sample_radius;
  r["samples"] = sv.samples;
  Json rows = Json::array();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto reg = check_regularity(model.generalized, c.kappa, model.y_s, ro);
    Json row;
    row["index"] = i + 1;
    row["kappa"] = multi_index_json(c.kappa);
    row["case"] = c.case_name();
    std::vector<std::string> subset;
    for (auto j : c.subset) subset.push_back(jet_name(j, 0));
    row["subset"] = subset;
    row["column"] = c.column ? Json(jet_name(*c.column, 2)) : Json(nullptr);
    row["margin"] = c.margin;
    row["sigma_min_at_equilibrium"] = reg.sigma_min_at_equilibrium;
    row["sigma_min_over_ball"] = reg.sigma_min_over_ball;
    row["regular"] = reg.regular;
    rows.push_back(std::move(row));
  }
  r["candidates"] = rows;
  return r;
}

const KappaCandidate& select_candidate(const std::vector<KappaCandidate>& candidates, const std::string& selector) {
  std::string text = selector;
  text.erase(std::remove_if(text.begin(), text.end(), [](char c) { return c == ' '; }), text.end());
  const bool is_index = !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  if (is_index) {
    const std::size_t i = std::stoul(text);
    if (i >= 1 && i <= candidates.size()) return candidates[i - 1];
  } else {
    try {
      const MultiIndex k = MultiIndex::parse(text.front() == '(' ? text : "(" + text + ")");
      for (const auto& c : candidates) {
        if (c.kappa == k) return c;
      }
    } catch (const ValidationError&) {
    }
  }
  std::string valid;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    valid += (valid.empty() ? "" : ", ") + candidate_label(i, candidates[i]);
  }
  throw ValidationError("no candidate matches '" + selector + "'; valid selectors: " +
                        (valid.empty() ? "none (no admissible chain lengths)" : valid));
}

SimulationResult run_simulation(const Model& model, const SimulationRequest& req) {
  const auto& sv = model.config.solver;
  const auto candidates = model_candidates(model);
  const KappaCandidate& cand = select_candidate(candidates, req.kappa);
  const auto& y0 = model.config.named_equilibrium(req.from);
  const auto& y1 = model.config.named_equilibrium(req.to);

  FeedbackSettings fs;
  fs.tol = sv.newton_tol;
  fs.max_iter = sv.newton_max_iter;
  fs.max_halvings = sv.newton_halvings;
  const FeedbackLaw law(model.generalized, cand.kappa, fs);
  const GeneralizedPlant plant(model.gen(), model.phi);
  const ReferenceTrajectory ref = plan_rest_to_rest(model.gen(), model.generalized, y0, y1, sv.T, sv.boundary_order);
  SimOptions so;
  so.dt = sv.dt;
  so.T = sv.T;
  so.strategy = sv.strategy;
  so.branch_factor = sv.branch_factor;

  SimulationResult res;
  res.reference = flat_side_rollout(plant, model.generalized, ref, so);
  res.closed_loop = simulate_closed_loop(plant, law, ref, res.reference.x.front(), so);

  const auto target = equilibrium_point(model, y1);
  Vec x_target(static_cast<Eigen::Index>(plant.state_dim()));
  x_target << target.q_tilde, Vec::Zero(target.q_tilde.size());
  const auto lin = verify_linearization(res.closed_loop, cand.kappa, ref);
  const auto pb = power_balance(plant, res.closed_loop);
  const auto& cl = res.closed_loop;

  Json r;
  r["name"] = model.config.name;
  r["kappa"] = multi_index_json(cand.kappa);
  r["case"] = cand.case_name();
  r["strategy"] = sv.strategy;
  r["dt"] = sv.dt;
  r["T"] = sv.T;
  r["steps"] = cl.size() - 1;
  r["from"] = {{"name", req.from}, {"y", y0}};
  r["to"] = {{"name", req.to}, {"y", y1}};
  r["w_slots"] = multi_index_json(law.w_slots());
  r["unknowns"] = law.unknowns();

  Json c;
  c["final_state"] = vector_json(cl.x.back());
  c["target_state"] = vector_json(x_target);
  c["final_state_error"] = (cl.x.back() - x_target).lpNorm<Eigen::Infinity>();
  c["max_newton_iterations"] = *std::max_element(cl.iterations.begin(), cl.iterations.end());
  c["max_solve_residual"] = *std::max_element(cl.solve_residual.begin(), cl.solve_residual.end());
  c["max_mixed_condition"] = *std::max_element(cl.mixed_condition.begin(), cl.mixed_condition.end());
  r["closed_loop"] = c;

  Json l;
  l["relative_error"] = lin.relative_error;
  l["absolute_error"] = lin.absolute_error;
  l["scale"] = lin.scale;
  l["stride"] = lin.stride;
  l["clipped"] = lin.clipped;
  l["max_relative_error"] = lin.max_relative_error;
  l["pass"] = lin.max_relative_error <= 1e-3;
  r["linearization"] = l;

  const auto& dr = res.reference.dynamics_residual;
  const double max_dyn = dr.empty() ? 0.0 : *std::max_element(dr.begin(), dr.end());
  r["rollout"] = {{"max_dynamics_residual", max_dyn}, {"pass", max_dyn <= 1e-6}};
  const double diff = max_state_difference(res.closed_loop, res.reference);
  r["cross_validation"] = {{"max_state_difference", diff}, {"pass", diff <= 1e-4}};
  r["power_balance"] = {{"energy_change", pb.energy_change},
                        {"work", pb.work},
                        {"relative_error", pb.relative_error},
                        {"pass", pb.relative_error <= 1e-4}};

  if (!req.out.empty()) {
    ensure_dir(req.out);
    write_csv(res.closed_loop, req.out / "closed_loop.csv");
    write_plot_script(res.closed_loop, "closed_loop.csv", req.out / "closed_loop.gp");
    write_csv(res.reference, req.out / "reference.csv");
    write_plot_script(res.reference, "reference.csv", req.out / "reference.gp");
    {
      std::ofstream f(req.out / "effective.cfg");
      f << emit_config(model.config);
    }
    res.files = {"closed_loop.csv", "closed_loop.gp", "reference.csv", "reference.gp", "effective.cfg", "report.json"};
    r["files"] = res.files;
    write_json(r, req.out / "report.json");
    write_manifest(req.out, res.files);
  }
  res.report = std::move(r);
  return res;
}

PlanResult run_plan(const Model& model, const std::string& from, const std::string& to,
                    const std::filesystem::path& out) {
  const auto& sv = model.config.solver;
  const auto& y0 = model.config.named_equilibrium(from);
  const auto& y1 = model.config.named_equilibrium(to);
  const ReferenceTrajectory ref = plan_rest_to_rest(model.gen(), model.generalized, y0, y1, sv.T, sv.boundary_order);
  const GeneralizedPlant plant(model.gen(), model.phi);
  SimOptions so;
  so.dt = sv.dt;
  so.T = sv.T;
  PlanResult res;
  res.reference = flat_side_rollout(plant, model.generalized, ref, so);
  const auto& tr = res.reference;

  auto endpoint = [&](const std::string& name, const std::vector<double>& y) {
    const auto ep = equilibrium_point(model, y);
    return Json{{"name", name},         {"y", y},
                {"q", vector_json(ep.q)}, {"u", vector_json(ep.u)},
                {"q_tilde", vector_json(ep.q_tilde)}, {"u_tilde", vector_json(ep.u_tilde)},
                {"residual", ep.residual}};
  };
  Vec min_u = tr.u.front(), max_u = tr.u.front();
  double max_cond = 0.0, max_dyn = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    min_u = min_u.cwiseMin(tr.u[i]);
    max_u = max_u.cwiseMax(tr.u[i]);
    max_cond = std::max(max_cond, tr.mixed_condition[i]);
    max_dyn = std::max(max_dyn, tr.dynamics_residual[i]);
  }
  Json r;
  r["name"] = model.config.name;
  r["T"] = sv.T;
  r["dt"] = sv.dt;
  r["boundary_order"] = sv.boundary_order;
  r["from"] = endpoint(from, y0);
  r["to"] = endpoint(to, y1);
  r["input_names"] = tr.input_names;
  r["input_min"] = vector_json(min_u);
  r["input_max"] = vector_json(max_u);
  r["max_mixed_condition"] = max_cond;
  r["max_dynamics_residual"] = max_dyn;
  r["pass"] = max_dyn <= 1e-6;
  if (!out.empty()) {
    ensure_dir(out);
    write_csv(tr, out / "reference.csv");
    write_plot_script(tr, "reference.csv", out / "reference.gp");
    res.files = {"reference.csv", "reference.gp", "plan.json"};
    r["files"] = res.files;
    write_json(r, out / "plan.json");
    write_manifest(out, res.files);
  }
  res.report = std::move(r);
  return res;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& files) {
  Json m;
  Json list = Json::array();
  for (const auto& f : files) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(dir / f, ec);
    list.push_back({{"path", f}, {"bytes", ec ? 0 : size}});
  }
  m["files"] = list;
  write_json(m, dir / "manifest.json");
}

namespace {

bool is_flat_array(const Json& j) {
  return j.is_array() && std::all_of(j.begin(), j.end(), [](const Json& x) { return x.is_primitive(); });
}

void render(const Json& j, std::ostringstream& o, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const Json& v = it.value();
      if (v.is_primitive() || is_flat_array(v)) {
        o << pad << it.key() << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
      } else if (v.is_array() && std::all_of(v.begin(), v.end(), is_flat_array) && !v.empty()) {
        o << pad << it.key() << ":\n";
        for (const auto& row : v) o << pad << "  " << row.dump() << "\n";
      } else {
        o << pad << it.key() << ":\n";
        render(v, o, indent + 2);
      }
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (v.is_object()) {
        std::ostringstream inner;
        render(v, inner, indent + 2);
        std::string s = inner.str();
        s.replace(static_cast<std::size_t>(indent), 2, "- ");
        o << s;
      } else {
        o << pad << "- " << v.dump() << "\n";
      }
    }
  } else {
    o << pad << j.dump() << "\n";
  }
}

}  // namespace

std::string render_text(const Json& report) {
  std::ostringstream o;
  render(report, o, 0);
  return o.str();
}

}  // namespace qslin
