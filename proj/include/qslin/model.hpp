#pragma once

// Assembles a project config into the symbolic objects of the pipeline:
// the Lagrangian system, its classical and generalized state forms, and
// the certified flat maps.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qslin/config.hpp"
#include "qslin/flatness.hpp"
#include "qslin/mechanics.hpp"

namespace qslin {

struct Model {
  ProjectConfig config;
  /// Evaluated parameters in declaration order.
  std::vector<std::pair<std::string, double>> parameters;
  LagrangianSystem system;
  std::optional<ClassicalStateForm> classical_form;
  std::optional<GeneralizedSystem> generalized_system;
  std::vector<Promotion> promotion;
  /// Flat output phi(q) and the supplied configuration parameterization.
  std::vector<Expr> phi, Fq;
  FlatMap classical, generalized;
  FlatMapCertificate certificate;
  JetPoint y_s;

  const ClassicalStateForm& csf() const { return *classical_form; }
  const GeneralizedSystem& gen() const { return *generalized_system; }
  std::size_t outputs() const noexcept { return phi.size(); }

  /// Equilibrium jets at y0, truncated at the configured order.
  JetPoint equilibrium(std::span<const double> y0) const;
};

/// Parses, validates and certifies. Errors name the offending config field.
Model build_model(const ProjectConfig& config);

struct EquilibriumPoint {
  Vec q, u;          // classical configuration and forces
  Vec q_tilde, u_tilde;
  double residual = 0.0;  // |c(q, 0) - G(q) u|
};

/// Rest configuration parameterized by y0. Throws MathConditionError when the
/// flat map does not produce an equilibrium there.
EquilibriumPoint equilibrium_point(const Model& model, std::span<const double> y0, double tol = 1e-9);

}  // namespace qslin
