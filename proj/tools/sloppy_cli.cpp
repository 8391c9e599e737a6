#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "sloppy/commands.hpp"
#include "sloppy/config.hpp"
#include "sloppy/error.hpp"

namespace {

void add_common(CLI::App* cmd, sloppy::CommandOptions& opts, std::string* config_path) {
  if (config_path) cmd->add_option("--config", *config_path, "Run configuration (JSON)")->required();
  cmd->add_option("--out", opts.out, "Output directory (overrides output.dir)");
  cmd->add_option("--workers", opts.workers, "Concurrent simulate() calls");
  cmd->add_flag("--timing", opts.timing, "Record wall-clock time in the report");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sloppiness analysis and stiff-direction exploration for stochastic simulators"};
  app.set_version_flag("--version", std::string(SLOPPY_VERSION));
  app.require_subcommand(1);

  sloppy::CommandOptions opts;
  std::string config_path;

  auto* spectrum = app.add_subcommand("spectrum", "Fisher matrix and eigen-spectrum at one parameter point");
  add_common(spectrum, opts, &config_path);
  spectrum->add_flag("--dump-ensembles", opts.dump_ensembles, "Write the reference ensemble as CSV");

  auto* explore = app.add_subcommand("explore", "Stiff-direction walk from the configured point");
  add_common(explore, opts, &config_path);
  explore->add_option("--seed", opts.seed, "Walk RNG seed (overrides walk.seed)");
  explore->add_flag("--resume", opts.resume, "Continue an interrupted walk.jsonl");
  explore->add_flag("--both-orientations", opts.both_orientations, "Also walk from the opposite first direction");

  auto* validate = app.add_subcommand("validate", "Polynomial Hilbert-matrix convergence study");
  add_common(validate, opts, nullptr);

  std::size_t wp = 8, wm = 64, wtrials = 200;
  auto* wishart = app.add_subcommand("wishart", "Pooled Wishart null eigenvalues");
  add_common(wishart, opts, nullptr);
  wishart->add_option("--P", wp, "Matrix size")->capture_default_str();
  wishart->add_option("--M", wm, "Samples per matrix")->capture_default_str();
  wishart->add_option("--trials", wtrials, "Number of matrices")->capture_default_str();
  wishart->add_option("--seed", opts.seed, "RNG seed (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sloppy::kExitConfig;
  }

  try {
    sloppy::CommandResult result;
    if (*spectrum) {
      result = sloppy::cmd_spectrum(sloppy::load_run_config(config_path), opts);
    } else if (*explore) {
      result = sloppy::cmd_explore(sloppy::load_run_config(config_path), opts);
    } else if (*validate) {
      result = sloppy::cmd_validate(opts);
    } else {
      result = sloppy::cmd_wishart(wp, wm, wtrials, opts);
    }
    for (const auto& f : result.files) std::cout << f << '\n';
    if (result.exit_code == sloppy::kExitValidation) std::cerr << "validation failed\n";
    return result.exit_code;
  } catch (const sloppy::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sloppy::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sloppy::kExitFailure;
  }
}
