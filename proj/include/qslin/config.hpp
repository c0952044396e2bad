#pragma once

// Line-oriented project configuration:
//
//   # comment
//   [section]
//   key = value
//
// Expressions are double-quoted strings; lists are comma separated. Matrix
// entries use 1-based keys such as metric[1,2]; vector entries use Fq[3].
// Sections: parameters, definitions, system, promotion, flat, solver, scenario.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qslin {

struct SolverSettings {
  int max_order = 6;
  double residual_tol = 1e-8;
  int residual_points = 50;
  double rank_tol = 1e-8;
  double sample_radius = 1e-2;
  int samples = 20;
  std::uint64_t seed = 1;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  int newton_halvings = 30;
  double dt = 1e-3;
  double T = 5.0;
  int boundary_order = 5;
  /// "analytic" or "numeric": how the closed loop obtains input derivatives.
  std::string strategy = "analytic";
  double branch_factor = 50.0;
  friend bool operator==(const SolverSettings&, const SolverSettings&) = default;
};

using NamedText = std::vector<std::pair<std::string, std::string>>;

struct ProjectConfig {
  std::string name;
  /// Numeric constants, each an expression over earlier parameters.
  NamedText parameters;
  /// Symbolic shorthands, expanded into every later expression.
  NamedText definitions;
  std::vector<std::string> coordinates, velocities, inputs;
  /// 0-based (row, col) -> expression text; absent entries are zero.
  std::map<std::pair<std::size_t, std::size_t>, std::string> metric, input_matrix;
  std::string potential = "0";
  /// (input name, coordinate name)
  std::vector<std::pair<std::string, std::string>> promotion;
  std::vector<std::string> outputs, Fq;
  std::vector<double> equilibrium;
  SolverSettings solver;
  /// Named equilibria of the flat output; "start" and "end" drive `simulate`.
  std::vector<std::pair<std::string, std::vector<double>>> scenario;

  friend bool operator==(const ProjectConfig&, const ProjectConfig&) = default;

  const std::vector<double>& named_equilibrium(const std::string& name) const;
};

/// Throws ValidationError naming the origin, line and field.
ProjectConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ProjectConfig load_config(const std::filesystem::path& path);

/// The effective config with every setting explicit; re-parses to an equal config.
std::string emit_config(const ProjectConfig& cfg);

/// Names of the built-in configs.
std::vector<std::string> builtin_names();
/// Throws ValidationError for an unknown name.
std::string builtin_config_text(const std::string& name);

/// A path to a file, or "builtin:<name>".
ProjectConfig resolve_config(const std::string& spec);

}  // namespace qslin
