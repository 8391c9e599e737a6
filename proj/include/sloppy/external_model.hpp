#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sloppy/model.hpp"

namespace sloppy {

struct ExternalModelSpec {
  std::string executable;
  std::vector<std::string> extra_args;
  double timeout_seconds = 3600.0;
  // Empty means "discover from the CSV header of the first run".
  std::vector<std::string> variables;
  // Canonical parameter order; empty keeps the order of the run config.
  std::vector<std::string> parameter_names;
  // Failed runs leave their scratch directory behind for inspection.
  bool keep_failed_runs = true;

  void validate() const;
};

// Drives a simulator executable through a file protocol:
//
//   <exe> [extra args] --params <params.json> --seed <int> --steps <T> --out <out.csv>
//
// params.json is a flat {name: value} object with round-trip decimal values.
// out.csv is a header row of K variable names followed by exactly T rows of
// ','-separated reals, '\n'-terminated.
class ExternalModel final : public SimulationModel {
 public:
  explicit ExternalModel(ExternalModelSpec spec);

  // Throws ProtocolError if discovery mode is on and no run has completed yet.
  std::vector<std::string> variable_names() const override;
  std::vector<std::string> parameter_names() const override { return spec_.parameter_names; }
  Series simulate(const ParameterPoint& params, std::uint64_t seed, std::size_t steps) const override;

  const ExternalModelSpec& spec() const noexcept { return spec_; }

 private:
  ExternalModelSpec spec_;
  mutable std::mutex names_mutex_;
  mutable std::optional<std::vector<std::string>> discovered_;
};

// Parses the out.csv body. Exposed for tests.
Series parse_protocol_csv(const std::string& text, std::size_t steps, const std::vector<std::string>& expected,
                          std::vector<std::string>* header_out = nullptr);

}  // namespace sloppy
