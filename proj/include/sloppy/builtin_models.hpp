#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sloppy/model.hpp"

namespace sloppy {

// Cell-centred grid on [0, 1]: x_k = (k + 0.5) / n.
std::vector<double> midpoint_grid(std::size_t n);

// f(x) = sum_n p_n x^n (+ N(0, sigma) noise), evaluated on a fixed x-grid
// that plays the role of the time axis. Parameters are p0..pN and may be
// zero or negative, so this model is differentiated in linear mode.
class PolynomialModel final : public SimulationModel {
 public:
  PolynomialModel(std::size_t degree, std::vector<double> x_grid, double noise_sigma = 0.0);

  std::vector<std::string> variable_names() const override { return {"f"}; }
  std::vector<std::string> parameter_names() const override;
  Series simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const override;

  std::size_t degree() const noexcept { return degree_; }
  const std::vector<double>& x_grid() const noexcept { return x_grid_; }
  double noise_sigma() const noexcept { return sigma_; }

 private:
  std::size_t degree_;
  std::vector<double> x_grid_;
  double sigma_;
};

// i.i.d. N(ln phi1, phi2^2) samples. Its per-observation Fisher matrix in
// (ln phi1, ln phi2) is diag(1/phi2^2, 2).
class GaussianToyModel final : public SimulationModel {
 public:
  std::vector<std::string> variable_names() const override { return {"x"}; }
  std::vector<std::string> parameter_names() const override { return {"phi1", "phi2"}; }
  Series simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const override;
};

enum class PhaseLabel { High, Low, Osc, Mid };

std::string_view to_string(PhaseLabel label) noexcept;
PhaseLabel phase_from_string(std::string_view name);

// Closed-form regime map over a = ln phi1, b = ln phi2. Precedence: HIGH, LOW,
// OSC, MID.
PhaseLabel synthetic_regime(double a, double b) noexcept;

// Regime-switching toy with known phase boundaries:
//   u_t = base(R) + 0.05 tanh((a+b)/4) + amp(R) sin(2 pi t / 64) + noise * g_t
// Parameters beyond phi1, phi2 are nuisance axes with no effect on output.
class SyntheticPhaseModel final : public SimulationModel {
 public:
  explicit SyntheticPhaseModel(std::size_t nuisance = 0, double noise = 0.01);

  std::vector<std::string> variable_names() const override { return {"u"}; }
  std::vector<std::string> parameter_names() const override;
  Series simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const override;

  std::size_t nuisance() const noexcept { return nuisance_; }

 private:
  std::size_t nuisance_;
  double noise_;
};

// HIGH if mean > 0.7, LOW if mean < 0.15, OSC if sample sd > 0.15, else MID.
// Requires at least 128 points (SeriesTooShort).
PhaseLabel classify_phase(std::span<const double> series);

// Classifies the seed-averaged series of the first variable.
PhaseLabel classify_ensemble(const EnsembleOutput& ensemble);

}  // namespace sloppy
