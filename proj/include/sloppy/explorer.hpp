#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sloppy/fisher.hpp"
#include "sloppy/loss.hpp"
#include "sloppy/model.hpp"
#include "sloppy/param_space.hpp"

namespace sloppy {

// Maps an ensemble to a regime label, e.g. "HIGH".
using PhaseClassifier = std::function<std::string(const EnsembleOutput&)>;

struct WalkConfig {
  std::size_t steps = 8;  // N
  double eps = 0.1;
  double eps_min = 0.3;
  double eps_max = 1.0;
  std::uint64_t seed = 1;
  // Draw the direction sign at random instead of the orientation / 165 degree rule.
  bool random_sign = false;
  // Replace the first-step orientation by its opposite (the "other" walk).
  bool reverse_first = false;

  SimulationConfig simulation;
  DiffSettings diff;
  LossKind loss = MseLoss{};
  PhaseClassifier classifier;

  void validate() const;
};

struct DirectionChoice {
  int index = 1;  // 1 or 2
  double probability_first = 1.0;
};

// Picks eigenvector 1 with probability lambda1 / (lambda1 + lambda2).
// lambda2 <= 0 is treated as 0. Throws DegenerateSpectrum if lambda1 <= 0.
DirectionChoice select_direction(double lambda1, double lambda2, std::mt19937_64& rng);

// cos(165 deg)
inline const double kMaxTurnCosine = std::cos(165.0 * std::numbers::pi / 180.0);

// Keeps v when v . v_prev >= cos(165 deg) (angle <= 165 deg), else returns -v.
Eigen::VectorXd fix_sign(const Eigen::VectorXd& v, const Eigen::VectorXd& v_prev);

// d = min( max(eps, eps_min sqrt(lambda1)) / sqrt(lambda_chosen), eps_max )
double step_distance(double lambda_chosen, double lambda1, double eps, double eps_min, double eps_max);

struct Orientation {
  int sign = 1;
  double loss_plus = 0.0;
  double loss_minus = 0.0;
  std::size_t calls = 0;
};

// First step only: evaluates exp(log phi0 +- d v) against the origin ensemble
// with the configured loss and keeps the sign with the larger loss (ties: +).
Orientation orient_first_step(const SimulationModel& model, const ParameterPoint& origin,
                              const EnsembleOutput& origin_ensemble, const Eigen::VectorXd& v, double d,
                              const WalkConfig& config);

struct WalkStep {
  std::size_t index = 0;  // 1-based
  std::vector<double> start_log;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> v1;
  std::vector<double> v2;
  int chosen = 1;
  double probability = 1.0;  // of choosing v1
  bool sign_flipped = false;
  std::vector<double> direction;  // realised unit direction
  double distance = 0.0;
  std::vector<double> end_log;
  double loss_vs_origin = 0.0;
  std::string phase;  // empty without a classifier
  std::size_t hessian_calls = 0;
  std::size_t orientation_calls = 0;
  std::size_t evaluation_calls = 0;

  std::size_t model_calls() const noexcept { return hessian_calls + orientation_calls + evaluation_calls; }
};

nlohmann::ordered_json step_to_json(const WalkStep& step);
WalkStep step_from_json(const nlohmann::ordered_json& j);

struct WalkTrace {
  std::vector<std::string> names;
  std::vector<double> origin_log;
  std::string origin_phase;
  std::size_t origin_calls = 0;
  std::size_t resume_calls = 0;  // re-running the last recorded end point
  std::vector<WalkStep> steps;
  bool aborted = false;
  std::string abort_reason;

  std::size_t hessian_calls() const;
  std::size_t orientation_calls() const;
  std::size_t total_calls() const;
};

// Called after every completed step (e.g. to append to a JSONL file).
using StepSink = std::function<void(const WalkStep&)>;

// Iterates the stiff-direction walk for config.steps steps, continuing after
// `resume_from` when given. A DegenerateSpectrum ends the walk early with the
// partial trace and the reason recorded.
WalkTrace run_walk(const SimulationModel& model, const ParameterPoint& origin, const WalkConfig& config,
                   const std::vector<WalkStep>& resume_from = {}, const StepSink& sink = {});

// Reads complete JSON lines; a truncated final line is ignored.
std::vector<WalkStep> read_walk_jsonl(const std::string& path);

}  // namespace sloppy
