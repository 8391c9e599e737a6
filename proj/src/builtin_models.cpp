#include "sloppy/builtin_models.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "sloppy/error.hpp"

namespace sloppy {

std::vector<double> midpoint_grid(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  return x;
}

// --- polynomial -------------------------------------------------------------

PolynomialModel::PolynomialModel(std::size_t degree, std::vector<double> x_grid, double noise_sigma)
    : degree_(degree), x_grid_(std::move(x_grid)), sigma_(noise_sigma) {
  if (x_grid_.empty()) throw Error(ErrorKind::InvalidArgument, "polynomial x-grid is empty");
  for (double x : x_grid_) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::InvalidArgument, "polynomial x-grid must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise sigma must be >= 0");
}

std::vector<std::string> PolynomialModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t n = 0; n <= degree_; ++n) names.push_back("p" + std::to_string(n));
  return names;
}

Series PolynomialModel::simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const {
  if (params.size() != degree_ + 1) {
    throw Error(ErrorKind::InvalidArgument, "polynomial of degree " + std::to_string(degree_) + " needs " +
                                                std::to_string(degree_ + 1) + " coefficients");
  }
  if (steps != x_grid_.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "polynomial T must equal the grid size " + std::to_string(x_grid_.size()));
  }
  const auto& p = params.linear();
  Series out(1, steps);
  // Horner, highest degree first; the subprocess reference script uses the same order.
  for (std::size_t t = 0; t < steps; ++t) {
    const double x = x_grid_[t];
    double v = p[degree_];
    for (std::size_t n = degree_; n-- > 0;) v = v * x + p[n];
    out(0, t) = v;
  }
  if (sigma_ > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_);
    for (std::size_t t = 0; t < steps; ++t) out(0, t) += noise(rng);
  }
  return out;
}

// --- gaussian toy -----------------------------------------------------------

Series GaussianToyModel::simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const {
  if (params.size() != 2) throw Error(ErrorKind::InvalidArgument, "gaussian toy takes (phi1, phi2)");
  const double mu = params.log()[0];
  const double sigma = params.linear()[1];
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Series out(1, steps);
  for (std::size_t t = 0; t < steps; ++t) out(0, t) = mu + sigma * z(rng);
  return out;
}

// --- synthetic phase model --------------------------------------------------

std::string_view to_string(PhaseLabel label) noexcept {
  switch (label) {
    case PhaseLabel::High: return "HIGH";
    case PhaseLabel::Low: return "LOW";
    case PhaseLabel::Osc: return "OSC";
    case PhaseLabel::Mid: return "MID";
  }
  return "MID";
}

PhaseLabel phase_from_string(std::string_view name) {
  if (name == "HIGH") return PhaseLabel::High;
  if (name == "LOW") return PhaseLabel::Low;
  if (name == "OSC") return PhaseLabel::Osc;
  if (name == "MID") return PhaseLabel::Mid;
  throw Error(ErrorKind::InvalidArgument, "unknown phase label '" + std::string(name) + "'");
}

PhaseLabel synthetic_regime(double a, double b) noexcept {
  if (a + b >= 2.0) return PhaseLabel::High;
  if (a + b <= -2.0) return PhaseLabel::Low;
  if (a - b >= 1.5) return PhaseLabel::Osc;
  return PhaseLabel::Mid;
}

namespace {

double regime_base(PhaseLabel r) {
  switch (r) {
    case PhaseLabel::High: return 0.9;
    case PhaseLabel::Low: return 0.05;
    case PhaseLabel::Osc: return 0.45;
    case PhaseLabel::Mid: return 0.30;
  }
  return 0.30;
}

}  // namespace

SyntheticPhaseModel::SyntheticPhaseModel(std::size_t nuisance, double noise) : nuisance_(nuisance), noise_(noise) {
  if (!(noise >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise level must be >= 0");
}

std::vector<std::string> SyntheticPhaseModel::parameter_names() const {
  std::vector<std::string> names{"phi1", "phi2"};
  for (std::size_t i = 0; i < nuisance_; ++i) names.push_back("nuisance" + std::to_string(i + 1));
  return names;
}

Series SyntheticPhaseModel::simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const {
  if (params.size() != 2 + nuisance_) {
    throw Error(ErrorKind::InvalidArgument,
                "synthetic model expects " + std::to_string(2 + nuisance_) + " parameters");
  }
  const double a = params.log()[0];
  const double b = params.log()[1];
  const PhaseLabel regime = synthetic_regime(a, b);
  const double level = regime_base(regime) + 0.05 * std::tanh((a + b) / 4.0);
  const double amp = regime == PhaseLabel::Osc ? 0.35 : 0.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Series out(1, steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double u = level + amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 64.0);
    // Always draw so the noise stream is identical across parameter values.
    const double gt = g(rng);
    if (noise_ > 0.0) u += noise_ * gt;
    out(0, t) = u;
  }
  return out;
}

PhaseLabel classify_phase(std::span<const double> series) {
  if (series.size() < 128) {
    throw Error(ErrorKind::SeriesTooShort, "need >= 128 points, got " + std::to_string(series.size()));
  }
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : series) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (mean > 0.7) return PhaseLabel::High;
  if (mean < 0.15) return PhaseLabel::Low;
  if (sd > 0.15) return PhaseLabel::Osc;
  return PhaseLabel::Mid;
}

PhaseLabel classify_ensemble(const EnsembleOutput& ensemble) {
  std::vector<double> avg(ensemble.steps(), 0.0);
  for (std::size_t s = 0; s < ensemble.seeds(); ++s) {
    const auto series = ensemble.series(s, 0);
    for (std::size_t t = 0; t < avg.size(); ++t) avg[t] += series[t];
  }
  for (double& x : avg) x /= static_cast<double>(ensemble.seeds());
  return classify_phase(avg);
}

}  // namespace sloppy
