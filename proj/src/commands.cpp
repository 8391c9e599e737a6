#include "sloppy/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "sloppy/builtin_models.hpp"
#include "sloppy/error.hpp"
#include "sloppy/explorer.hpp"

namespace sloppy {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code_for(const Error& error) noexcept {
  if (error.kind() == ErrorKind::ConfigError || error.kind() == ErrorKind::InvalidSimulationConfig) {
    return kExitConfig;
  }
  if (is_model_error(error.kind())) return kExitModel;
  return kExitFailure;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json provenance_block(const std::string& command, const json& config, std::uint64_t seed) {
  // The output location does not influence any result.
  json hashed = config;
  if (hashed.is_object()) hashed.erase("output");
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(hashed.dump())));
  return {{"tool", "sloppy"}, {"version", SLOPPY_VERSION}, {"command", command}, {"config_hash", hex},
          {"seed", seed}};
}

void apply_overrides(RunConfig& config, const CommandOptions& options) {
  if (options.out) {
    config.output_dir = *options.out;
    config.document["output"]["dir"] = *options.out;
  }
  if (options.workers) {
    if (*options.workers == 0) throw Error(ErrorKind::ConfigError, "--workers: must be >= 1");
    config.simulation.workers = *options.workers;
    config.document["simulation"]["workers"] = *options.workers;
  }
  if (options.seed && config.walk) {
    config.walk->seed = *options.seed;
    config.document["walk"]["seed"] = *options.seed;
  }
  if (options.both_orientations && config.walk) {
    config.walk->both_orientations = true;
    config.document["walk"]["both_orientations"] = true;
  }
}

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::binary | std::ios::out | mode);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  return out;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string csv_join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  return line;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void write_fisher_csv(const std::string& path, const FisherMatrix& fisher) {
  auto out = open_out(path);
  out << csv_join(fisher.names) << '\n';
  for (Eigen::Index i = 0; i < fisher.entries.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < fisher.entries.cols(); ++j) row.push_back(format_real(fisher.entries(i, j)));
    out << csv_join(row) << '\n';
  }
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum, const AxisSimilarityReport& sims) {
  auto out = open_out(path);
  std::vector<std::string> header{"index", "eigenvalue", "ratio", "sim", "best_axis"};
  for (const auto& n : spectrum.names) header.push_back(n);
  out << csv_join(header) << '\n';
  const auto ratios = spectrum.ratios();
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    std::vector<std::string> row{std::to_string(i + 1), format_real(spectrum.eigenvalues[col]),
                                 format_real(ratios[i]), format_real(sims.similarity[i]),
                                 spectrum.names[sims.best_axis[i]]};
    for (Eigen::Index p = 0; p < spectrum.eigenvectors.rows(); ++p) {
      row.push_back(format_real(spectrum.eigenvectors(p, col)));
    }
    out << csv_join(row) << '\n';
  }
}

CommandResult cmd_spectrum(RunConfig config, const CommandOptions& options) {
  apply_overrides(config, options);
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  const auto inner = make_model(config);
  CountingModel model(*inner);

  const auto est = estimate_fisher(model, config.parameters, config.simulation, config.diff, config.loss);
  const auto spectrum = eigendecompose(est.fisher);
  const auto sims = axis_similarity(spectrum);

  CommandResult result;
  const auto fisher_path = path_in(config.output_dir, "fisher.csv");
  const auto spectrum_path = path_in(config.output_dir, "spectrum.csv");
  write_fisher_csv(fisher_path, est.fisher);
  write_spectrum_csv(spectrum_path, spectrum, sims);
  result.files = {fisher_path, spectrum_path};

  if (options.dump_ensembles) {
    const auto dir = path_in(config.output_dir, "ensembles");
    fs::create_directories(dir);
    write_ensemble_csv(est.reference, config.simulation, dir, "reference");
  }

  json best = json::array();
  for (auto axis : sims.best_axis) best.push_back(spectrum.names[axis]);
  json report;
  report["provenance"] = provenance_block("spectrum", config.document, config.simulation.seeds.front());
  report["config"] = config.document;
  report["parameters"] = spectrum.names;
  report["loss"] = loss_to_json(config.loss);
  report["eigenvalues"] = vector_json(spectrum.eigenvalues);
  report["ratios"] = spectrum.ratios();
  report["sims"] = sims.similarity;
  report["best_axes"] = best;
  report["fisher"] = est.fisher.provenance;
  report["model_calls"] = {{"reference", est.reference_calls},
                           {"derivative", est.derivative_calls},
                           {"total", model.calls()}};
  if (options.timing) report["wall_clock_seconds"] = seconds_since(start);
  const auto report_path = path_in(config.output_dir, "report.json");
  write_json(report_path, report);
  result.files.push_back(report_path);
  result.report = std::move(report);
  return result;
}

namespace {

// Drops a partially written final line so appends continue on a line boundary.
void truncate_to_complete_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto last = text.rfind('\n');
  fs::resize_file(path, last == std::string::npos ? 0 : last + 1);
}

json walk_json(const WalkTrace& trace, const std::string& file, bool reversed) {
  json j;
  j["file"] = file;
  j["first_orientation"] = reversed ? "reversed" : "loss-maximising";
  j["steps"] = trace.steps.size();
  j["aborted"] = trace.aborted;
  if (trace.aborted) j["abort_reason"] = trace.abort_reason;
  std::vector<double> probs;
  std::vector<int> chosen;
  std::vector<double> distances;
  std::vector<std::string> phases;
  std::size_t evaluation = 0;
  for (const auto& s : trace.steps) {
    probs.push_back(s.probability);
    chosen.push_back(s.chosen);
    distances.push_back(s.distance);
    phases.push_back(s.phase);
    evaluation += s.evaluation_calls;
  }
  j["probability_v1"] = probs;
  j["chosen"] = chosen;
  j["distance"] = distances;
  j["phases"] = phases;
  j["end_log"] = trace.steps.empty() ? trace.origin_log : trace.steps.back().end_log;
  j["model_calls"] = {{"origin", trace.origin_calls},
                      {"resume", trace.resume_calls},
                      {"hessian", trace.hessian_calls()},
                      {"orientation", trace.orientation_calls()},
                      {"evaluation", evaluation},
                      {"total", trace.total_calls()}};
  return j;
}

}  // namespace

CommandResult cmd_explore(RunConfig config, const CommandOptions& options) {
  if (!config.walk) throw Error(ErrorKind::ConfigError, "walk: section required for explore");
  apply_overrides(config, options);
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(config.output_dir);
  const auto model = make_model(config);
  const auto base = make_walk_config(config);

  std::vector<bool> orientations{false};
  if (config.walk->both_orientations) orientations.push_back(true);

  CommandResult result;
  json walks = json::array();
  std::set<std::string> visited;
  std::size_t total_calls = 0;
  std::string origin_phase;
  for (bool reversed : orientations) {
    const std::string name = reversed ? "walk_opposite.jsonl" : "walk.jsonl";
    const auto path = path_in(config.output_dir, name);
    std::vector<WalkStep> done;
    if (options.resume && fs::exists(path)) {
      truncate_to_complete_lines(path);
      done = read_walk_jsonl(path);
    } else {
      open_out(path).close();
    }
    auto wc = base;
    wc.reverse_first = reversed;
    auto out = open_out(path, std::ios::app);
    const auto trace = run_walk(*model, config.parameters, wc, done, [&](const WalkStep& step) {
      out << step_to_json(step).dump() << '\n';
      out.flush();
    });
    result.files.push_back(path);
    origin_phase = trace.origin_phase;
    if (!trace.origin_phase.empty()) visited.insert(trace.origin_phase);
    for (const auto& s : trace.steps) {
      if (!s.phase.empty()) visited.insert(s.phase);
    }
    total_calls += trace.total_calls();
    walks.push_back(walk_json(trace, name, reversed));
  }

  json summary;
  summary["provenance"] = provenance_block("explore", config.document, config.walk->seed);
  summary["config"] = config.document;
  summary["parameters"] = config.parameters.names();
  summary["origin_log"] = config.parameters.log();
  summary["origin_phase"] = origin_phase;
  summary["visited_phases"] = std::vector<std::string>(visited.begin(), visited.end());
  summary["walks"] = walks;
  summary["total_model_calls"] = total_calls;
  if (options.timing) summary["wall_clock_seconds"] = seconds_since(start);
  const auto summary_path = path_in(config.output_dir, "summary.json");
  write_json(summary_path, summary);
  result.files.push_back(summary_path);
  result.report = std::move(summary);
  return result;
}

CommandResult cmd_validate(const CommandOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::string dir = options.out.value_or("out");
  fs::create_directories(dir);
  constexpr std::size_t kDegree = 3;
  constexpr std::size_t kP = kDegree + 1;
  const std::vector<double> sigmas{0.0, 0.1};
  const std::vector<std::size_t> seed_counts{1, 20};

  json args = {{"degree", kDegree}, {"grids", kValidateGrids}, {"sigmas", sigmas}, {"S", seed_counts}};
  json report;
  report["provenance"] = provenance_block("validate", args, 1);
  json limit = json::array();
  for (std::size_t i = 0; i < kP; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < kP; ++j) row.push_back(1.0 / static_cast<double>(i + j + 1));
    limit.push_back(row);
  }
  report["limit"] = limit;
  report["threshold"] = 1e-3;

  bool passed = true;
  json runs = json::array();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kP; ++i) names.push_back("p" + std::to_string(i));
  const auto params = ParameterPoint::linear_only(names, std::vector<double>(kP, 1.0));
  for (double sigma : sigmas) {
    for (std::size_t s : seed_counts) {
      for (std::size_t n : kValidateGrids) {
        const PolynomialModel model(kDegree, midpoint_grid(n), sigma);
        SimulationConfig sim;
        sim.seeds = SimulationConfig::seed_range(1, s);
        sim.steps = n;
        sim.workers = options.workers.value_or(1);
        DiffSettings diff{DiffMode::Linear, std::nullopt};
        const auto est = estimate_fisher(model, params, sim, diff, MseLoss{Normalization::Unit});
        std::size_t above3 = 0;
        std::size_t above2 = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < kP; ++i) {
          for (std::size_t j = i; j < kP; ++j) {
            const double target = 1.0 / static_cast<double>(i + j + 1);
            const double rel = std::abs(est.fisher.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                                        target) / target;
            worst = std::max(worst, rel);
            above3 += rel > 1e-3 ? 1 : 0;
            above2 += rel > 1e-2 ? 1 : 0;
          }
        }
        if (sigma == 0.0 && n == kValidateGrids.back() && above3 > 0) passed = false;
        json fisher = json::array();
        for (std::size_t i = 0; i < kP; ++i) {
          std::vector<double> row;
          for (std::size_t j = 0; j < kP; ++j) {
            row.push_back(est.fisher.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
          }
          fisher.push_back(row);
        }
        runs.push_back({{"grid", n},
                        {"sigma", sigma},
                        {"S", s},
                        {"entries_above_1e-3", above3},
                        {"entries_above_1e-2", above2},
                        {"max_relative_error", worst},
                        {"fisher", fisher}});
      }
    }
  }
  report["runs"] = runs;
  report["passed"] = passed;
  if (options.timing) report["wall_clock_seconds"] = seconds_since(start);
  CommandResult result;
  const auto path = path_in(dir, "hilbert_report.json");
  write_json(path, report);
  result.files = {path};
  result.exit_code = passed ? kExitOk : kExitValidation;
  result.report = std::move(report);
  return result;
}

CommandResult cmd_wishart(std::size_t p, std::size_t m, std::size_t trials, const CommandOptions& options) {
  if (p < 1) throw Error(ErrorKind::ConfigError, "wishart.P: must be >= 1");
  if (m < p) throw Error(ErrorKind::ConfigError, "wishart.M: must be >= P");
  if (trials < 1) throw Error(ErrorKind::ConfigError, "wishart.trials: must be >= 1");
  const std::uint64_t seed = options.seed.value_or(1);
  const std::string dir = options.out.value_or("out");
  fs::create_directories(dir);

  const auto values = wishart_null(p, m, trials, seed);
  const auto csv_path = path_in(dir, "wishart_null.csv");
  {
    auto out = open_out(csv_path);
    out << "trial,rank,eigenvalue\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      out << (i / p) + 1 << ',' << (i % p) + 1 << ',' << format_real(values[i]) << '\n';
    }
  }
  const auto [lo, hi] = marchenko_pastur_support(p, m);
  std::size_t inside = 0;
  for (double v : values) inside += (v >= lo - 0.1 && v <= hi + 0.1) ? 1 : 0;

  json args = {{"P", p}, {"M", m}, {"trials", trials}};
  json report;
  report["provenance"] = provenance_block("wishart", args, seed);
  report["P"] = p;
  report["M"] = m;
  report["trials"] = trials;
  report["eigenvalues"] = values.size();
  report["marchenko_pastur_support"] = {lo, hi};
  report["fraction_inside_widened_0.1"] = static_cast<double>(inside) / static_cast<double>(values.size());
  const auto json_path = path_in(dir, "wishart_report.json");
  write_json(json_path, report);

  CommandResult result;
  result.files = {csv_path, json_path};
  result.report = std::move(report);
  return result;
}

}  // namespace sloppy
