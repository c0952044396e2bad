#include "qslin/model.hpp"

#include <algorithm>
#include <set>

#include "qslin/error.hpp"

namespace qslin {

namespace {

std::string index_key(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i + 1) + "]"; }

std::string index_key(const std::string& base, std::size_t i, std::size_t j) {
  return base + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]";
}

// Parses config expressions with parameters folded in and definitions expanded.
class Compiler {
 public:
  explicit Compiler(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw ValidationError(origin_ + ": " + field + ": " + msg);
  }

  Expr parse_field(const std::string& field, const std::string& text) const {
    try {
      return parse(text);
    } catch (const ParseError& e) {
      fail(field, e.what());
    }
  }

  void reserve(const std::string& field, const std::string& name) {
    if (macros_.count(name)) fail(field, "'" + name + "' is defined twice");
    if (reserved_.count(name)) fail(field, "'" + name + "' clashes with a variable name");
  }

  void add_reserved(const std::string& name) { reserved_.insert(name); }

  double add_parameter(const std::string& name, const std::string& text) {
    const std::string field = "[parameters] " + name;
    reserve(field, name);
    const Expr e = simplify(substitute(parse_field(field, text), macros_));
    if (!e.is_constant()) {
      fail(field, "not a constant (free variables: " + join(free_variables(e)) + ")");
    }
    macros_.emplace(name, e);
    return e.value();
  }

  void add_definition(const std::string& name, const std::string& text) {
    const std::string field = "[definitions] " + name;
    reserve(field, name);
    macros_.emplace(name, simplify(substitute(parse_field(field, text), macros_)));
  }

  /// Every free variable must satisfy `allowed`.
  template <class Pred>
  Expr compile(const std::string& field, const std::string& text, Pred allowed, const std::string& scope) const {
    const Expr e = simplify(substitute(parse_field(field, text), macros_));
    for (const auto& v : free_variables(e)) {
      if (!allowed(v)) fail(field, "unknown variable '" + v + "' (expected " + scope + ")");
    }
    return e;
  }

 private:
  static std::string join(const std::set<std::string>& s) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : ", ") + x;
    return out;
  }

  std::string origin_;
  Substitution macros_;
  std::set<std::string> reserved_;
};

std::vector<double> evaluate(const std::vector<Expr>& rows, const JetPoint& y) {
  return Program(rows, jet_names(y.outputs(), y.max_order())).run(y.data());
}

}  // namespace

JetPoint Model::equilibrium(std::span<const double> y0) const {
  if (y0.size() != outputs()) {
    throw ValidationError("equilibrium needs " + std::to_string(outputs()) + " values, got " +
                          std::to_string(y0.size()));
  }
  return make_equilibrium(y0, config.solver.max_order);
}

Model build_model(const ProjectConfig& cfg) {
  Model model;
  model.config = cfg;
  Compiler cc(cfg.name.empty() ? "config" : cfg.name);

  const std::size_t p = cfg.coordinates.size();
  const std::size_t m_out = cfg.outputs.size();
  for (const auto* names : {&cfg.coordinates, &cfg.velocities, &cfg.inputs}) {
    for (const auto& n : *names) cc.add_reserved(n);
  }
  for (std::size_t j = 0; j < m_out; ++j) {
    for (int a = 0; a <= cfg.solver.max_order; ++a) cc.add_reserved(jet_name(j, a));
  }
  for (const auto& [name, text] : cfg.parameters) model.parameters.emplace_back(name, cc.add_parameter(name, text));
  for (const auto& [name, text] : cfg.definitions) cc.add_definition(name, text);

  const std::set<std::string> coords(cfg.coordinates.begin(), cfg.coordinates.end());
  auto in_q = [&](const std::string& v) { return coords.count(v) > 0; };
  auto is_jet = [&](const std::string& v) {
    auto jv = parse_jet_name(v);
    return jv && jv->output < m_out && jv->order <= cfg.solver.max_order;
  };

  LagrangianSystem& sys = model.system;
  sys.q = cfg.coordinates;
  sys.v = cfg.velocities;
  sys.u = cfg.inputs;
  sys.metric = make_matrix(p, p);
  for (const auto& [pos, text] : cfg.metric) {
    sys.metric[pos.first][pos.second] =
        cc.compile("[system] " + index_key("metric", pos.first, pos.second), text, in_q, "coordinates");
  }
  sys.input_matrix = make_matrix(p, cfg.inputs.size());
  for (const auto& [pos, text] : cfg.input_matrix) {
    sys.input_matrix[pos.first][pos.second] =
        cc.compile("[system] " + index_key("input_matrix", pos.first, pos.second), text, in_q, "coordinates");
  }
  sys.potential = cc.compile("[system] potential", cfg.potential, in_q, "coordinates");
  sys.validate();

  for (std::size_t j = 0; j < m_out; ++j) {
    model.phi.push_back(cc.compile("[flat] " + index_key("outputs", j), cfg.outputs[j], in_q, "coordinates"));
  }
  for (std::size_t i = 0; i < p; ++i) {
    model.Fq.push_back(cc.compile("[flat] " + index_key("Fq", i), cfg.Fq[i], is_jet,
                                  "jet variables y1..y" + std::to_string(m_out) + " up to order " +
                                      std::to_string(cfg.solver.max_order)));
  }

  for (const auto& [input, coord] : cfg.promotion) {
    const auto ui = std::find(cfg.inputs.begin(), cfg.inputs.end(), input) - cfg.inputs.begin();
    const auto qi = std::find(cfg.coordinates.begin(), cfg.coordinates.end(), coord) - cfg.coordinates.begin();
    model.promotion.push_back({static_cast<std::size_t>(ui), static_cast<std::size_t>(qi)});
  }

  model.classical_form.emplace(sys);
  FlatMapOptions fo;
  fo.max_order = cfg.solver.max_order;
  fo.residual_points = cfg.solver.residual_points;
  fo.residual_tol = cfg.solver.residual_tol;
  fo.seed = cfg.solver.seed;
  model.classical = build_flat_map(*model.classical_form, model.phi, model.Fq, fo, &model.certificate);
  model.generalized_system.emplace(*model.classical_form, model.promotion);
  model.generalized = restrict_to_generalized(model.classical, *model.generalized_system);
  model.y_s = model.equilibrium(cfg.equilibrium);
  return model;
}

EquilibriumPoint equilibrium_point(const Model& model, std::span<const double> y0, double tol) {
  const JetPoint y = model.equilibrium(y0);
  EquilibriumPoint ep;
  std::vector<double> v;
  try {
    ep.q = to_eigen(evaluate(model.classical.Fq, y));
    ep.u = to_eigen(evaluate(model.classical.Fu, y));
    ep.q_tilde = to_eigen(evaluate(model.generalized.Fq, y));
    ep.u_tilde = to_eigen(evaluate(model.generalized.Fu, y));
    v = evaluate(model.classical.Fv, y);
  } catch (const EvalError& e) {
    std::string where;
    for (double x : y0) where += (where.empty() ? "" : ", ") + std::to_string(x);
    throw MathConditionError("flat map is undefined at the rest point y = (" + where + "): " + e.what());
  }
  const Vec vz = Vec::Zero(ep.q.size());
  ep.residual = (model.csf().bias(ep.q, vz) - model.csf().input(ep.q) * ep.u).lpNorm<Eigen::Infinity>();
  double vmax = 0.0;
  for (double x : v) vmax = std::max(vmax, std::abs(x));
  if (!(ep.residual <= tol) || vmax > tol) {
    throw MathConditionError("rest point is not an equilibrium: force residual " + std::to_string(ep.residual) +
                             ", velocity " + std::to_string(vmax));
  }
  return ep;
}

}  // namespace qslin
