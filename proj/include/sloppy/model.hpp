#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sloppy/param_space.hpp"

namespace sloppy {

// K x T block of one simulation run, row-major (variable, time).
struct Series {
  std::size_t variables = 0;
  std::size_t steps = 0;
  std::vector<double> data;

  Series() = default;
  Series(std::size_t k, std::size_t t) : variables(k), steps(t), data(k * t, 0.0) {}

  double& operator()(std::size_t k, std::size_t t) { return data[k * steps + t]; }
  double operator()(std::size_t k, std::size_t t) const { return data[k * steps + t]; }
};

// A stochastic simulator. simulate() must be a pure function of
// (params, seed, steps) and always return the same variable layout.
class SimulationModel {
 public:
  virtual ~SimulationModel() = default;

  virtual std::vector<std::string> variable_names() const = 0;
  virtual Series simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const = 0;

  // Canonical parameter order; empty when the model accepts any names.
  virtual std::vector<std::string> parameter_names() const { return {}; }
  // Models returning false are invoked from one thread at a time.
  virtual bool thread_safe() const { return true; }
};

// Wraps a model and counts simulate() calls.
class CountingModel final : public SimulationModel {
 public:
  explicit CountingModel(const SimulationModel& inner) : inner_(inner) {}

  std::vector<std::string> variable_names() const override { return inner_.variable_names(); }
  std::vector<std::string> parameter_names() const override { return inner_.parameter_names(); }
  bool thread_safe() const override { return inner_.thread_safe(); }
  Series simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.simulate(params, seed, steps);
  }

  std::size_t calls() const noexcept { return calls_.load(); }
  void reset() noexcept { calls_ = 0; }

 private:
  const SimulationModel& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

struct OutputTransform {
  // ln(x + c) when set.
  std::optional<double> log_shift;
};

struct SimulationConfig {
  std::vector<std::uint64_t> seeds{1};
  std::size_t steps = 0;          // T
  std::size_t equilibration = 0;  // T_eq: observations with t < T_eq are discarded
  OutputTransform transform;
  std::size_t workers = 1;

  std::size_t kept_steps() const noexcept { return steps - equilibration; }
  // Throws InvalidSimulationConfig.
  void validate() const;

  // seeds = base, base+1, ..., base+count-1
  static std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count);
};

// S x K x T' observables after the equilibration cutoff.
class EnsembleOutput {
 public:
  EnsembleOutput() = default;
  // Throws NonFiniteOutput if any entry is NaN or infinite.
  EnsembleOutput(std::size_t seeds, std::vector<std::string> variable_names, std::size_t steps,
                 std::vector<double> values);

  std::size_t seeds() const noexcept { return seeds_; }
  std::size_t variables() const noexcept { return names_.size(); }
  std::size_t steps() const noexcept { return steps_; }
  const std::vector<std::string>& variable_names() const noexcept { return names_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t s, std::size_t k, std::size_t t) const {
    return values_[(s * names_.size() + k) * steps_ + t];
  }
  std::span<const double> series(std::size_t s, std::size_t k) const {
    return {values_.data() + (s * names_.size() + k) * steps_, steps_};
  }

  bool same_shape(const EnsembleOutput& other) const noexcept {
    return seeds_ == other.seeds_ && steps_ == other.steps_ && names_.size() == other.names_.size();
  }

  friend bool operator==(const EnsembleOutput&, const EnsembleOutput&) = default;

 private:
  std::size_t seeds_ = 0;
  std::size_t steps_ = 0;
  std::vector<std::string> names_;
  std::vector<double> values_;
};

// ln(x + c); throws NonPositiveShifted when x + c <= 0.
double log_shift_transform(double x, double c);

// Runs every seed (possibly concurrently) and assembles in seed order, so the
// result does not depend on the schedule.
EnsembleOutput run_ensemble(const SimulationModel& model, const ParameterPoint& params,
                            const SimulationConfig& config);

// Writes one CSV per seed: <dir>/<prefix>_seed<seed>.csv, header = variable
// names, one row per kept step.
void write_ensemble_csv(const EnsembleOutput& ensemble, const SimulationConfig& config,
                        const std::string& directory, const std::string& prefix);

// Runs `count` jobs on at most `workers` threads. The exception thrown by the
// lowest-indexed failing job is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn);

}  // namespace sloppy

#include "sloppy/detail/parallel.hpp"
