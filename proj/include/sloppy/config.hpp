#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sloppy/explorer.hpp"
#include "sloppy/external_model.hpp"
#include "sloppy/fisher.hpp"
#include "sloppy/loss.hpp"
#include "sloppy/model.hpp"
#include "sloppy/param_space.hpp"

namespace sloppy {

struct ModelSelector {
  // "synthetic", "polynomial" or "gaussian"; empty for an external model.
  std::string builtin;
  std::size_t nuisance = 0;   // synthetic
  double noise = 0.01;        // synthetic
  std::size_t degree = 0;     // polynomial
  std::size_t grid = 0;       // polynomial, defaults to T
  double sigma = 0.0;         // polynomial
  std::optional<ExternalModelSpec> external;
};

struct WalkSection {
  std::size_t steps = 8;
  double eps = 0.1;
  double eps_min = 0.3;
  double eps_max = 1.0;
  std::uint64_t seed = 1;
  bool both_orientations = false;
  bool random_sign = false;
  // "threshold" (classify_ensemble on the first variable) or "none".
  std::string classifier = "none";
};

struct RunConfig {
  ModelSelector model;
  ParameterPoint parameters;
  SimulationConfig simulation;
  LossKind loss = MseLoss{};
  DiffSettings diff;
  std::optional<WalkSection> walk;
  std::string output_dir = "out";
  // The document as parsed, with command-line overrides folded in. Hashed
  // into the provenance block.
  nlohmann::ordered_json document;
};

// Validates the whole document; every failure is a ConfigError whose message
// starts with the offending field path (e.g. "simulation.T_eq"). Relative
// paths are resolved against `base_dir`.
RunConfig parse_run_config(const nlohmann::ordered_json& doc, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

std::unique_ptr<SimulationModel> make_model(const RunConfig& config);

WalkConfig make_walk_config(const RunConfig& config);

}  // namespace sloppy
