// Command-line front end: analyze, kappa, simulate, plan, config.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "qslin/error.hpp"
#include "qslin/report.hpp"

namespace {

struct Common {
  std::string config;
  bool json = false;
  std::string out;
  std::optional<double> dt, T;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("qslin");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("QSLIN_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

qslin::Model load(const Common& c) {
  qslin::ProjectConfig cfg = qslin::resolve_config(c.config);
  if (c.dt) cfg.solver.dt = *c.dt;
  if (c.T) cfg.solver.T = *c.T;
  if (c.seed) cfg.solver.seed = *c.seed;
  if (c.strategy) cfg.solver.strategy = *c.strategy;
  // Re-validate overrides through the parser.
  cfg = qslin::parse_config(qslin::emit_config(cfg), c.config);
  spdlog::info("building model '{}'", cfg.name);
  qslin::Model model = qslin::build_model(cfg);
  spdlog::info("flat map certified: residual {:.3g} at {} points", model.certificate.max_residual,
               model.certificate.points);
  return model;
}

void emit(const qslin::Json& report, bool json) {
  if (json) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::cout << qslin::render_text(report);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-static feedback linearization of minimally underactuated Lagrangian systems"};
  app.require_subcommand(1);
  Common c;
  std::string kappa_sel = "1";
  std::string from = "start", to = "end";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", c.config, "config file or builtin:<name>")->required();
    sub->add_flag("--json", c.json, "print the JSON report instead of text");
  };
  auto* analyze = app.add_subcommand("analyze", "orders, certificate and equilibrium Jacobian structure");
  add_common(analyze);
  auto* kappa = app.add_subcommand("kappa", "admissible integrator-chain lengths");
  add_common(kappa);
  auto* simulate = app.add_subcommand("simulate", "closed-loop rest-to-rest transition");
  add_common(simulate);
  simulate->add_option("--kappa", kappa_sel, "candidate index (1-based) or multi-index, e.g. 0,2,4");
  simulate->add_option("--dt", c.dt, "time step [s]");
  simulate->add_option("--T", c.T, "transition time [s]");
  simulate->add_option("--seed", c.seed, "seed for random sampling");
  simulate->add_option("--strategy", c.strategy, "analytic or numeric input derivatives");
  simulate->add_option("--from", from, "scenario name of the start equilibrium");
  simulate->add_option("--to", to, "scenario name of the end equilibrium");
  simulate->add_option("--out", c.out, "output directory")->default_val("out");
  auto* plan = app.add_subcommand("plan", "rest-to-rest reference through the flat side");
  add_common(plan);
  plan->add_option("--from", from, "scenario name of the start equilibrium")->required();
  plan->add_option("--to", to, "scenario name of the end equilibrium")->required();
  plan->add_option("--T", c.T, "transition time [s]");
  plan->add_option("--dt", c.dt, "sample spacing [s]");
  plan->add_option("--out", c.out, "output directory")->default_val("out");
  auto* config = app.add_subcommand("config", "print the effective config");
  config->add_option("config", c.config, "config file or builtin:<name>")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  setup_logging();

  try {
    if (config->parsed()) {
      std::cout << qslin::emit_config(qslin::resolve_config(c.config));
      return 0;
    }
    const qslin::Model model = load(c);
    if (analyze->parsed()) {
      const auto report = qslin::analyze_report(model);
      emit(report, c.json);
      if (!report["structure"]["pass"].get<bool>()) {
        spdlog::error("equilibrium Jacobian structure check failed");
        return 3;
      }
    } else if (kappa->parsed()) {
      const auto candidates = qslin::model_candidates(model);
      emit(qslin::kappa_report(model, candidates), c.json);
      if (candidates.empty()) {
        spdlog::warn("no admissible chain lengths: the rank conditions fail at the equilibrium");
        return 3;
      }
    } else if (simulate->parsed()) {
      qslin::SimulationRequest req;
      req.kappa = kappa_sel;
      req.from = from;
      req.to = to;
      req.out = c.out;
      const auto res = qslin::run_simulation(model, req);
      emit(res.report, c.json);
      spdlog::info("wrote {} files to {}", res.files.size(), c.out);
    } else if (plan->parsed()) {
      const auto res = qslin::run_plan(model, from, to, c.out);
      emit(res.report, c.json);
    }
  } catch (const qslin::Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
  return 0;
}
