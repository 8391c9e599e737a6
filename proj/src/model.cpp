#include "sloppy/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "sloppy/error.hpp"

namespace sloppy {

void SimulationConfig::validate() const {
  if (seeds.empty()) throw Error(ErrorKind::InvalidSimulationConfig, "at least one seed is required");
  if (steps == 0) throw Error(ErrorKind::InvalidSimulationConfig, "T must be positive");
  if (equilibration >= steps) {
    throw Error(ErrorKind::InvalidSimulationConfig,
                "T_eq=" + std::to_string(equilibration) + " must be below T=" + std::to_string(steps));
  }
  if (transform.log_shift && !(*transform.log_shift > 0.0)) {
    throw Error(ErrorKind::InvalidSimulationConfig, "log-shift constant must be positive");
  }
}

std::vector<std::uint64_t> SimulationConfig::seed_range(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

EnsembleOutput::EnsembleOutput(std::size_t seeds, std::vector<std::string> variable_names, std::size_t steps,
                               std::vector<double> values)
    : seeds_(seeds), steps_(steps), names_(std::move(variable_names)), values_(std::move(values)) {
  if (values_.size() != seeds_ * names_.size() * steps_) {
    throw Error(ErrorKind::ShapeMismatch, "ensemble values do not match S x K x T'");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      const std::size_t t = i % steps_;
      const std::size_t k = (i / steps_) % names_.size();
      const std::size_t s = i / (steps_ * names_.size());
      throw Error(ErrorKind::NonFiniteOutput, "seed index " + std::to_string(s) + ", variable '" + names_[k] +
                                                  "', kept step " + std::to_string(t));
    }
  }
}

double log_shift_transform(double x, double c) {
  const double shifted = x + c;
  if (!(shifted > 0.0)) {
    throw Error(ErrorKind::NonPositiveShifted,
                "x + c = " + std::to_string(shifted) + " (x=" + std::to_string(x) + ", c=" + std::to_string(c) + ")");
  }
  return std::log(shifted);
}

EnsembleOutput run_ensemble(const SimulationModel& model, const ParameterPoint& params,
                            const SimulationConfig& config) {
  config.validate();
  const std::size_t n_seeds = config.seeds.size();
  std::vector<Series> runs(n_seeds);

  std::mutex serial;
  const bool concurrent = model.thread_safe();
  parallel_for(n_seeds, concurrent ? config.workers : 1, [&](std::size_t s) {
    const std::uint64_t seed = config.seeds[s];
    try {
      if (concurrent) {
        runs[s] = model.simulate(params, seed, config.steps);
      } else {
        std::lock_guard lock(serial);
        runs[s] = model.simulate(params, seed, config.steps);
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::ModelFailure, "seed " + std::to_string(seed) + ": " + e.what());
    }
  });

  // Queried after the runs: external models may discover their variables
  // from the first output file.
  const auto names = model.variable_names();
  const std::size_t n_vars = names.size();
  const std::size_t kept = config.kept_steps();
  std::vector<double> values(n_seeds * n_vars * kept);
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = config.seeds[s];
    const Series& out = runs[s];
    if (out.variables != n_vars || out.steps != config.steps || out.data.size() != n_vars * config.steps) {
      throw Error(ErrorKind::ModelFailure, "seed " + std::to_string(seed) + ": expected " + std::to_string(n_vars) +
                                               " x " + std::to_string(config.steps) + " output, got " +
                                               std::to_string(out.variables) + " x " + std::to_string(out.steps));
    }
    for (std::size_t k = 0; k < n_vars; ++k) {
      for (std::size_t t = 0; t < kept; ++t) {
        const std::size_t step = config.equilibration + t;
        double x = out(k, step);
        if (!std::isfinite(x)) {
          throw Error(ErrorKind::NonFiniteOutput, "seed " + std::to_string(seed) + ", variable '" + names[k] +
                                                      "', step " + std::to_string(step));
        }
        if (config.transform.log_shift) x = log_shift_transform(x, *config.transform.log_shift);
        if (!std::isfinite(x)) {
          throw Error(ErrorKind::NonFiniteOutput, "seed " + std::to_string(seed) + ", variable '" + names[k] +
                                                      "', step " + std::to_string(step) + " after transform");
        }
        values[(s * n_vars + k) * kept + t] = x;
      }
    }
  }
  return EnsembleOutput(n_seeds, names, kept, std::move(values));
}

void write_ensemble_csv(const EnsembleOutput& ensemble, const SimulationConfig& config,
                        const std::string& directory, const std::string& prefix) {
  std::filesystem::create_directories(directory);
  char buf[32];
  for (std::size_t s = 0; s < ensemble.seeds(); ++s) {
    const auto path = std::filesystem::path(directory) /
                      (prefix + "_seed" + std::to_string(config.seeds.at(s)) + ".csv");
    std::ofstream out(path, std::ios::binary);
    for (std::size_t k = 0; k < ensemble.variables(); ++k) {
      out << (k ? "," : "") << ensemble.variable_names()[k];
    }
    out << '\n';
    for (std::size_t t = 0; t < ensemble.steps(); ++t) {
      for (std::size_t k = 0; k < ensemble.variables(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", ensemble(s, k, t));
        out << (k ? "," : "") << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace sloppy
