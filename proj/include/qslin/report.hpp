#pragma once

// Run reports behind the command-line tool and the Python module. Every
// report is a JSON object; the text form is rendered from the same object.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qslin/model.hpp"
#include "qslin/sim.hpp"

namespace qslin {

using Json = nlohmann::ordered_json;

/// Orders, certificate, classical Jacobian structure and the generalized
/// equilibrium Jacobian blocks at the configured equilibrium.
Json analyze_report(const Model& model);

/// Candidate chain lengths with their witnesses and regularity margins.
Json kappa_report(const Model& model, const std::vector<KappaCandidate>& candidates);

/// Candidates of the generalized map at the configured equilibrium.
std::vector<KappaCandidate> model_candidates(const Model& model);

/// Accepts a 1-based table index or a multi-index such as "(0,2,4)" or "0,2,4".
/// Throws ValidationError listing the valid selectors.
const KappaCandidate& select_candidate(const std::vector<KappaCandidate>& candidates, const std::string& selector);

struct SimulationRequest {
  std::string kappa = "1";
  std::string from = "start", to = "end";
  /// Output directory; nothing is written when empty.
  std::filesystem::path out;
};

struct SimulationResult {
  Json report;
  Trajectory closed_loop, reference;
  std::vector<std::string> files;
};

/// Plans the transition, synthesizes the law, runs the closed loop and the
/// flat-side rollout and checks them against each other.
SimulationResult run_simulation(const Model& model, const SimulationRequest& request);

struct PlanResult {
  Json report;
  Trajectory reference;
  std::vector<std::string> files;
};

PlanResult run_plan(const Model& model, const std::string& from, const std::string& to,
                    const std::filesystem::path& out = {});

/// Writes manifest.json listing `files` (relative to `dir`) with their sizes.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& files);

/// Indented plain-text rendering with numbers printed exactly as in the JSON.
std::string render_text(const Json& report);

}  // namespace qslin
