#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sloppy/config.hpp"
#include "sloppy/error.hpp"
#include "sloppy/fisher.hpp"
#include "sloppy/spectral.hpp"

namespace sloppy {

// Command-line overrides. Precedence: flag > config file > built-in default.
struct CommandOptions {
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;  // walk.seed for explore, the RNG seed for wishart
  bool dump_ensembles = false;
  bool timing = false;  // add wall-clock seconds to the report (breaks byte-identity)
  bool resume = false;
  bool both_orientations = false;
};

struct CommandResult {
  int exit_code = 0;
  std::vector<std::string> files;
  nlohmann::ordered_json report;
};

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitModel = 3, kExitValidation = 4 };

int exit_code_for(const Error& error) noexcept;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
nlohmann::ordered_json provenance_block(const std::string& command, const nlohmann::ordered_json& config,
                                        std::uint64_t seed);

// Folds the overrides into config (and its document).
void apply_overrides(RunConfig& config, const CommandOptions& options);

// %.17g: round-trips every double.
std::string format_real(double value);

void write_fisher_csv(const std::string& path, const FisherMatrix& fisher);
// index,eigenvalue,ratio,sim,best_axis,<P components>
void write_spectrum_csv(const std::string& path, const Spectrum& spectrum, const AxisSimilarityReport& sims);

CommandResult cmd_spectrum(RunConfig config, const CommandOptions& options);
CommandResult cmd_explore(RunConfig config, const CommandOptions& options);

// Hilbert study of the cubic polynomial model.
inline const std::vector<std::size_t> kValidateGrids{125, 250, 500, 1000, 2000};
CommandResult cmd_validate(const CommandOptions& options);

CommandResult cmd_wishart(std::size_t p, std::size_t m, std::size_t trials, const CommandOptions& options);

}  // namespace sloppy
