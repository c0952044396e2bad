// Python bindings: expressions, configs and the report-producing runs.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qslin/error.hpp"
#include "qslin/jets.hpp"
#include "qslin/model.hpp"
#include "qslin/report.hpp"

namespace py = pybind11;
using namespace qslin;

namespace {

py::object to_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::array_t<double> stack(const std::vector<Vec>& rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? static_cast<std::size_t>(rows.front().size()) : 0;
  py::array_t<double> out({n, m});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) a(i, k) = rows[i](static_cast<Eigen::Index>(k));
  }
  return out;
}

py::dict trajectory_dict(const Trajectory& tr) {
  py::dict d;
  d["state_names"] = tr.state_names;
  d["input_names"] = tr.input_names;
  d["output_names"] = tr.output_names;
  d["t"] = py::array_t<double>(static_cast<py::ssize_t>(tr.t.size()), tr.t.data());
  d["x"] = stack(tr.x);
  d["u"] = stack(tr.u);
  d["y"] = stack(tr.y);
  return d;
}

// Holds a built model together with the config it came from.
struct PyModel {
  Model model;

  static PyModel load(const std::string& spec, const py::dict& overrides) {
    ProjectConfig cfg = resolve_config(spec);
    for (const auto& [k, v] : overrides) {
      const std::string key = py::str(k).cast<std::string>();
      SolverSettings& sv = cfg.solver;
      if (key == "dt") {
        sv.dt = v.cast<double>();
      } else if (key == "T") {
        sv.T = v.cast<double>();
      } else if (key == "seed") {
        sv.seed = v.cast<std::uint64_t>();
      } else if (key == "strategy") {
        sv.strategy = v.cast<std::string>();
      } else if (key == "branch_factor") {
        sv.branch_factor = v.cast<double>();
      } else if (key == "boundary_order") {
        sv.boundary_order = v.cast<int>();
      } else {
        throw ValidationError("unknown override '" + key + "' (dt, T, seed, strategy, branch_factor, boundary_order)");
      }
    }
    // Re-parse so overrides get the same range checks as file values.
    if (!overrides.empty()) cfg = parse_config(emit_config(cfg), spec);
    return PyModel{build_model(cfg)};
  }
};

}  // namespace

PYBIND11_MODULE(_qslin, m) {
  m.doc() = "Quasi-static feedback linearization of minimally underactuated Lagrangian systems";

  // Derived errors (parse, evaluation) map to their category's exception.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<MathConditionError>(m, "MathConditionError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<Expr>(m, "Expr")
      .def(py::init([](const std::string& text) { return parse(text); }), py::arg("text"))
      .def("__str__", [](const Expr& e) { return print(e); })
      .def("__repr__", [](const Expr& e) { return "Expr('" + print(e) + "')"; })
      .def("__eq__", [](const Expr& a, const Expr& b) { return a == b; })
      .def("__hash__", &Expr::hash)
      .def("__add__", [](const Expr& a, const Expr& b) { return a + b; })
      .def("__sub__", [](const Expr& a, const Expr& b) { return a - b; })
      .def("__mul__", [](const Expr& a, const Expr& b) { return a * b; })
      .def("__truediv__", [](const Expr& a, const Expr& b) { return a / b; })
      .def("__neg__", [](const Expr& a) { return -a; })
      .def("diff", [](const Expr& e, const std::string& v) { return diff(e, v); }, py::arg("var"))
      .def("eval", [](const Expr& e, const VarBinding& b) { return eval(e, b); }, py::arg("binding"))
      .def("simplify", [](const Expr& e) { return simplify(e); })
      .def("normalize", [](const Expr& e) { return normalize(e); })
      .def("substitute", [](const Expr& e, const Substitution& s) { return substitute(e, s); }, py::arg("mapping"))
      .def("free_variables", [](const Expr& e) { return free_variables(e); })
      .def(
          "total_derivative",
          [](const Expr& e, int times, int cap) { return total_derivative(e, times, cap); },
          py::arg("times") = 1, py::arg("order_cap") = kDefaultMaxOrder)
      .def("node_count", [](const Expr& e) { return node_count(e); });
  py::implicitly_convertible<std::string, Expr>();

  m.def("parse", [](const std::string& text) { return parse(text); }, py::arg("text"));
  m.def("jet_name", [](std::size_t j, int a, const std::string& prefix) { return jet_name(j, a, prefix); },
        py::arg("output"), py::arg("order"), py::arg("prefix") = "y");

  m.def("builtin_names", &builtin_names);
  m.def("builtin_config_text", &builtin_config_text, py::arg("name"));
  m.def(
      "effective_config", [](const std::string& spec) { return emit_config(resolve_config(spec)); },
      py::arg("spec"));
  m.def(
      "check_config", [](const std::string& text) { return emit_config(parse_config(text, "<python>")); },
      py::arg("text"));

  py::class_<PyModel>(m, "Model")
      .def(py::init([](const std::string& spec, const py::kwargs& overrides) {
             return PyModel::load(spec, overrides ? py::dict(overrides) : py::dict());
           }),
           py::arg("spec"))
      .def_property_readonly("name", [](const PyModel& pm) { return pm.model.config.name; })
      .def_property_readonly("coordinates", [](const PyModel& pm) { return pm.model.system.q; })
      .def_property_readonly("inputs", [](const PyModel& pm) { return pm.model.system.u; })
      .def_property_readonly("generalized_state", [](const PyModel& pm) { return pm.model.gen().q(); })
      .def_property_readonly("generalized_inputs", [](const PyModel& pm) { return pm.model.gen().u(); })
      .def_property_readonly("R", [](const PyModel& pm) { return pm.model.generalized.R.values(); })
      .def_property_readonly("S", [](const PyModel& pm) { return pm.model.generalized.S.values(); })
      .def_property_readonly("Fq", [](const PyModel& pm) { return pm.model.generalized.Fq; })
      .def_property_readonly("Fu", [](const PyModel& pm) { return pm.model.generalized.Fu; })
      .def("effective_config", [](const PyModel& pm) { return emit_config(pm.model.config); })
      .def("analyze", [](const PyModel& pm) { return to_python(analyze_report(pm.model)); })
      .def("kappa", [](const PyModel& pm) {
        return to_python(kappa_report(pm.model, model_candidates(pm.model)));
      })
      .def(
          "simulate",
          [](const PyModel& pm, const std::string& kappa, const std::string& from, const std::string& to,
             std::optional<std::filesystem::path> out) {
            SimulationRequest req;
            req.kappa = kappa;
            req.from = from;
            req.to = to;
            if (out) req.out = *out;
            SimulationResult res;
            {
              py::gil_scoped_release release;
              res = run_simulation(pm.model, req);
            }
            py::dict d;
            d["report"] = to_python(res.report);
            d["closed_loop"] = trajectory_dict(res.closed_loop);
            d["reference"] = trajectory_dict(res.reference);
            d["files"] = res.files;
            return d;
          },
          py::arg("kappa") = "1", py::arg("from_") = "start", py::arg("to") = "end", py::arg("out") = py::none())
      .def(
          "plan",
          [](const PyModel& pm, const std::string& from, const std::string& to,
             std::optional<std::filesystem::path> out) {
            const PlanResult res = run_plan(pm.model, from, to, out.value_or(std::filesystem::path{}));
            py::dict d;
            d["report"] = to_python(res.report);
            d["reference"] = trajectory_dict(res.reference);
            d["files"] = res.files;
            return d;
          },
          py::arg("from_") = "start", py::arg("to") = "end", py::arg("out") = py::none());
}
