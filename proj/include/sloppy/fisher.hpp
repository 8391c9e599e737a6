#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sloppy/loss.hpp"
#include "sloppy/model.hpp"
#include "sloppy/param_space.hpp"

namespace sloppy {

// Log mode differentiates in ln(phi); linear mode in bare phi (needed for
// parameters that may be zero or negative).
enum class DiffMode { Log, Linear };

std::string to_string(DiffMode mode);
DiffMode diff_mode_from_string(const std::string& name);

struct DiffSettings {
  DiffMode mode = DiffMode::Log;
  // Log default 0.1. Linear default 1e-4 * max(1, |phi_i|) per axis; an
  // explicit h is used as the absolute step on every axis.
  std::optional<double> h;
};

inline constexpr double kDefaultLogStep = 0.1;
inline constexpr double kSmoothModelLogStep = 0.001;

std::vector<double> axis_steps(const ParameterPoint& params, const DiffSettings& diff);

// dy_{s,k,t} / d(coordinate_i), laid out (s, k, t, i) with i fastest.
struct JacobianTensor {
  std::size_t seeds = 0;
  std::size_t variables = 0;
  std::size_t steps = 0;
  std::size_t params = 0;
  std::vector<double> values;
  DiffMode mode = DiffMode::Log;
  std::vector<double> step;
  std::vector<std::string> names;

  double operator()(std::size_t s, std::size_t k, std::size_t t, std::size_t i) const {
    return values[((s * variables + k) * steps + t) * params + i];
  }
  double& operator()(std::size_t s, std::size_t k, std::size_t t, std::size_t i) {
    return values[((s * variables + k) * steps + t) * params + i];
  }
};

struct FisherMatrix {
  Eigen::MatrixXd entries;
  std::vector<std::string> names;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  std::size_t size() const noexcept { return names.size(); }
};

// Central differences on seed-matched ensembles: 2P ensemble runs.
JacobianTensor jacobian_central(const SimulationModel& model, const ParameterPoint& params,
                                const SimulationConfig& config, const DiffSettings& diff);

// H_ij = (1/SKT') sum_{s,k,t} J_i J_j / ||y_sk||^2, accumulated in (s, k, t)
// order. Exactly symmetric.
FisherMatrix fisher_from_jacobian(const JacobianTensor& jacobian, const EnsembleOutput& reference,
                                  Normalization normalization);

// Gauss-Newton Hessian at the reference for any time-series loss kind.
// mse: as above; mspe: (2/SKT') sum J_i J_j / y^2; logcosh: (1/SKT') sum J_i J_j.
// logabs has no finite Hessian at the reference and raises Divergent.
FisherMatrix fisher_from_jacobian(const JacobianTensor& jacobian, const EnsembleOutput& reference,
                                  const LossKind& loss);

// Histogram Fisher from already-run ensembles (reference at phi, plus/minus
// at phi +- h e_i in log space):
//   H_ij = (1/2SK) sum_{s,k} sum_b dP_b/di dP_b/dj / P_b
// on edges shared with the reference.
FisherMatrix fisher_from_histogram_runs(const EnsembleOutput& reference, std::span<const EnsembleOutput> plus,
                                        std::span<const EnsembleOutput> minus, std::span<const double> steps,
                                        const SklLoss& config, std::vector<std::string> names);

FisherMatrix fisher_from_histograms(const SimulationModel& model, const ParameterPoint& params,
                                    const SimulationConfig& config, double h, const SklLoss& kl_config);

// f(delta) for delta in the differentiation coordinates.
using Objective = std::function<double(std::span<const double> delta)>;

// 4-point stencil for d^2 f / dx_i dx_j at 0.
double mixed_central_difference(const Objective& f, std::size_t p, std::size_t i, std::size_t j, double hi,
                                double hj);

// Diagonal (f(+h) + f(-h) - 2 f(0)) / h^2, off-diagonal via the 4-point
// stencil. O(P^2) evaluations.
Eigen::MatrixXd second_difference_hessian(const Objective& f, std::span<const double> steps);

using EnsembleLoss = std::function<double(const EnsembleOutput& reference, const EnsembleOutput& candidate)>;

// Direct finite-difference Hessian of L(phi, delta) = loss(y(phi), y(phi + delta)).
Eigen::MatrixXd full_hessian_fd(const EnsembleLoss& loss, const SimulationModel& model,
                                const ParameterPoint& params, const SimulationConfig& config,
                                const DiffSettings& diff);

struct FisherEstimate {
  FisherMatrix fisher;
  EnsembleOutput reference;
  std::size_t derivative_calls = 0;  // simulate() calls for the 2P perturbed ensembles
  std::size_t reference_calls = 0;   // simulate() calls for the base ensemble
};

// Reference ensemble + Hessian for the configured loss: histogram Fisher for
// skl, Jacobian Fisher otherwise. A precomputed reference is reused.
FisherEstimate estimate_fisher(const SimulationModel& model, const ParameterPoint& params,
                               const SimulationConfig& config, const DiffSettings& diff, const LossKind& loss,
                               const EnsembleOutput* reference = nullptr);

}  // namespace sloppy
