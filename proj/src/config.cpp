#include "sloppy/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "sloppy/builtin_models.hpp"
#include "sloppy/error.hpp"

namespace sloppy {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigError, path + ": " + what);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(path.empty() ? key : path + "." + key, "unknown field");
  }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

std::size_t get_count(const json& j, const std::string& path, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  if (v.get<long long>() < 0) fail(join(path, key), "must not be negative");
  return v.get<std::size_t>();
}

std::uint64_t get_seed(const json& j, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(join(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double get_real(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  return v.get<double>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail(join(path, key), "expected a boolean");
  return j.at(key).get<bool>();
}

std::vector<std::string> get_strings(const json& j, const std::string& path, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const auto& v = j.at(key);
  if (!v.is_array()) fail(join(path, key), "expected an array of strings");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) fail(join(path, key) + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

ModelSelector parse_model(const json& j, const std::string& base_dir) {
  if (!j.is_object()) fail("model", "expected an object");
  const bool has_builtin = j.contains("builtin");
  const bool has_external = j.contains("external");
  if (has_builtin == has_external) fail("model", "exactly one of 'builtin' or 'external' is required");

  ModelSelector m;
  if (has_builtin) {
    check_keys(j, "model", {"builtin", "nuisance", "noise", "degree", "grid", "sigma"});
    if (!j.at("builtin").is_string()) fail("model.builtin", "expected a string");
    m.builtin = j.at("builtin").get<std::string>();
    if (m.builtin != "synthetic" && m.builtin != "polynomial" && m.builtin != "gaussian") {
      fail("model.builtin", "unknown builtin model '" + m.builtin + "'");
    }
    m.nuisance = get_count(j, "model", "nuisance", 0);
    m.noise = get_real(j, "model", "noise", 0.01);
    if (m.noise < 0.0) fail("model.noise", "must not be negative");
    m.degree = get_count(j, "model", "degree", 0);
    m.grid = get_count(j, "model", "grid", 0);
    m.sigma = get_real(j, "model", "sigma", 0.0);
    if (m.sigma < 0.0) fail("model.sigma", "must not be negative");
    return m;
  }

  check_keys(j, "model", {"external"});
  const auto& e = j.at("external");
  check_keys(e, "model.external", {"executable", "args", "timeout", "variables", "parameter_names", "keep_failed_runs"});
  ExternalModelSpec spec;
  if (!e.contains("executable") || !e.at("executable").is_string()) {
    fail("model.external.executable", "missing or not a string");
  }
  spec.executable = e.at("executable").get<std::string>();
  if (spec.executable.find('/') != std::string::npos) {
    fs::path p(spec.executable);
    if (p.is_relative()) p = fs::path(base_dir) / p;
    if (!fs::exists(p)) fail("model.external.executable", "file '" + p.string() + "' does not exist");
    spec.executable = p.lexically_normal().string();
  }
  spec.extra_args = get_strings(e, "model.external", "args");
  // Arguments naming files next to the config are resolved like the executable.
  for (auto& arg : spec.extra_args) {
    if (arg.find('/') != std::string::npos && !arg.starts_with("-")) {
      fs::path p(arg);
      if (p.is_relative() && fs::exists(fs::path(base_dir) / p)) arg = (fs::path(base_dir) / p).lexically_normal().string();
    }
  }
  spec.timeout_seconds = get_real(e, "model.external", "timeout", spec.timeout_seconds);
  if (!(spec.timeout_seconds > 0.0)) fail("model.external.timeout", "must be > 0");
  spec.variables = get_strings(e, "model.external", "variables");
  spec.parameter_names = get_strings(e, "model.external", "parameter_names");
  spec.keep_failed_runs = get_bool(e, "model.external", "keep_failed_runs", true);
  m.external = std::move(spec);
  return m;
}

std::vector<std::string> canonical_names(const ModelSelector& m) {
  if (m.external) return m.external->parameter_names;
  if (m.builtin == "gaussian") return GaussianToyModel().parameter_names();
  if (m.builtin == "synthetic") return SyntheticPhaseModel(m.nuisance).parameter_names();
  return PolynomialModel(m.degree, std::vector<double>(1, 0.5)).parameter_names();
}

SimulationConfig parse_simulation(const json& j, ModelSelector& model) {
  check_keys(j, "simulation", {"S", "seeds", "seed_base", "T", "T_eq", "log_shift", "workers"});
  SimulationConfig sim;
  if (j.contains("seeds")) {
    if (j.contains("S") || j.contains("seed_base")) fail("simulation.seeds", "give either seeds or S/seed_base");
    const auto& v = j.at("seeds");
    if (!v.is_array() || v.empty()) fail("simulation.seeds", "expected a non-empty array");
    sim.seeds.clear();
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto path = "simulation.seeds[" + std::to_string(i) + "]";
      if (!v[i].is_number_integer() || v[i].get<long long>() < 0) fail(path, "expected a non-negative integer");
      const auto s = v[i].get<std::uint64_t>();
      if (!seen.insert(s).second) fail(path, "duplicate seed");
      sim.seeds.push_back(s);
    }
  } else {
    const auto count = get_count(j, "simulation", "S", 1);
    if (count == 0) fail("simulation.S", "must be >= 1");
    sim.seeds = SimulationConfig::seed_range(get_seed(j, "simulation", "seed_base", 1), count);
  }

  if (j.contains("T_eq")) {
    const auto& v = j.at("T_eq");
    if (!v.is_number_integer() || v.get<long long>() < 0) fail("simulation.T_eq", "must be a non-negative integer");
  }
  sim.equilibration = get_count(j, "simulation", "T_eq", 0);
  sim.steps = get_count(j, "simulation", "T", 0);
  if (model.builtin == "polynomial") {
    if (sim.steps == 0) sim.steps = model.grid;
    if (model.grid == 0) model.grid = sim.steps;
    if (sim.steps != model.grid) fail("simulation.T", "must equal model.grid for the polynomial model");
    if (sim.equilibration != 0) fail("simulation.T_eq", "must be 0 for the polynomial model");
  }
  if (sim.steps == 0) fail("simulation.T", "must be a positive integer");
  if (sim.equilibration >= sim.steps) fail("simulation.T_eq", "must be below T");
  if (j.contains("log_shift")) {
    const double c = get_real(j, "simulation", "log_shift", 0.0);
    if (!(c > 0.0)) fail("simulation.log_shift", "must be > 0");
    sim.transform.log_shift = c;
  }
  sim.workers = get_count(j, "simulation", "workers", 1);
  if (sim.workers == 0) fail("simulation.workers", "must be >= 1");
  return sim;
}

WalkSection parse_walk(const json& j, const std::string& default_classifier) {
  check_keys(j, "walk", {"N", "eps", "eps_min", "eps_max", "seed", "both_orientations", "random_sign", "classifier"});
  WalkSection w;
  w.steps = get_count(j, "walk", "N", w.steps);
  if (w.steps == 0) fail("walk.N", "must be >= 1");
  w.eps = get_real(j, "walk", "eps", w.eps);
  w.eps_min = get_real(j, "walk", "eps_min", w.eps_min);
  w.eps_max = get_real(j, "walk", "eps_max", w.eps_max);
  if (!(w.eps > 0.0)) fail("walk.eps", "must be > 0");
  if (!(w.eps_min > 0.0)) fail("walk.eps_min", "must be > 0");
  if (!(w.eps_max >= w.eps)) fail("walk.eps_max", "must be >= eps");
  if (!(w.eps_max >= w.eps_min)) fail("walk.eps_max", "must be >= eps_min");
  w.seed = get_seed(j, "walk", "seed", w.seed);
  w.both_orientations = get_bool(j, "walk", "both_orientations", false);
  w.random_sign = get_bool(j, "walk", "random_sign", false);
  w.classifier = default_classifier;
  if (j.contains("classifier")) {
    if (!j.at("classifier").is_string()) fail("walk.classifier", "expected a string");
    w.classifier = j.at("classifier").get<std::string>();
    if (w.classifier != "threshold" && w.classifier != "none") {
      fail("walk.classifier", "expected 'threshold' or 'none'");
    }
  }
  return w;
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::string& base_dir) {
  check_keys(doc, "", {"description", "model", "parameters", "simulation", "loss", "differentiation", "walk", "output"});
  RunConfig cfg;
  cfg.document = doc;
  if (!doc.contains("model")) fail("model", "missing");
  cfg.model = parse_model(doc.at("model"), base_dir);

  if (!doc.contains("simulation")) fail("simulation", "missing");
  cfg.simulation = parse_simulation(doc.at("simulation"), cfg.model);

  if (doc.contains("loss")) cfg.loss = loss_from_json(doc.at("loss"), "loss");

  cfg.diff.mode = cfg.model.builtin == "polynomial" ? DiffMode::Linear : DiffMode::Log;
  if (doc.contains("differentiation")) {
    const auto& d = doc.at("differentiation");
    check_keys(d, "differentiation", {"mode", "h"});
    if (d.contains("mode")) {
      if (!d.at("mode").is_string()) fail("differentiation.mode", "expected a string");
      try {
        cfg.diff.mode = diff_mode_from_string(d.at("mode").get<std::string>());
      } catch (const Error& e) {
        fail("differentiation.mode", e.what());
      }
    }
    if (d.contains("h")) {
      const double h = get_real(d, "differentiation", "h", 0.0);
      if (!(h > 0.0)) fail("differentiation.h", "must be > 0");
      cfg.diff.h = h;
    }
  }
  if (std::holds_alternative<SklLoss>(cfg.loss) && cfg.diff.mode != DiffMode::Log) {
    fail("differentiation.mode", "the skl loss is differentiated in log mode only");
  }

  if (!doc.contains("parameters")) fail("parameters", "missing");
  const auto& pj = doc.at("parameters");
  if (!pj.is_object() || pj.empty()) fail("parameters", "expected a non-empty object");
  if (cfg.model.builtin == "synthetic" && !doc.at("model").contains("nuisance")) {
    cfg.model.nuisance = pj.size() >= 2 ? pj.size() - 2 : 0;
  }
  if (cfg.model.builtin == "polynomial" && !doc.at("model").contains("degree")) cfg.model.degree = pj.size() - 1;
  try {
    cfg.parameters = point_from_json(pj, canonical_names(cfg.model), cfg.diff.mode == DiffMode::Linear);
  } catch (const Error& e) {
    fail("parameters", e.what());
  }

  if (doc.contains("walk")) {
    cfg.walk = parse_walk(doc.at("walk"), cfg.model.builtin == "synthetic" ? "threshold" : "none");
    if (cfg.diff.mode != DiffMode::Log) fail("differentiation.mode", "the walk moves in log space; use log mode");
  }

  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    check_keys(o, "output", {"dir"});
    if (o.contains("dir")) {
      if (!o.at("dir").is_string()) fail("output.dir", "expected a string");
      fs::path p(o.at("dir").get<std::string>());
      if (p.is_relative()) p = fs::path(base_dir) / p;
      cfg.output_dir = p.lexically_normal().string();
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config: invalid JSON: ") + e.what());
  }
  const auto base = fs::path(path).parent_path();
  return parse_run_config(doc, base.empty() ? "." : base.string());
}

std::unique_ptr<SimulationModel> make_model(const RunConfig& config) {
  const auto& m = config.model;
  if (m.external) return std::make_unique<ExternalModel>(*m.external);
  if (m.builtin == "gaussian") return std::make_unique<GaussianToyModel>();
  if (m.builtin == "synthetic") return std::make_unique<SyntheticPhaseModel>(m.nuisance, m.noise);
  return std::make_unique<PolynomialModel>(m.degree, midpoint_grid(m.grid), m.sigma);
}

WalkConfig make_walk_config(const RunConfig& config) {
  if (!config.walk) throw Error(ErrorKind::ConfigError, "walk: section missing");
  const auto& w = *config.walk;
  WalkConfig wc;
  wc.steps = w.steps;
  wc.eps = w.eps;
  wc.eps_min = w.eps_min;
  wc.eps_max = w.eps_max;
  wc.seed = w.seed;
  wc.random_sign = w.random_sign;
  wc.simulation = config.simulation;
  wc.diff = config.diff;
  wc.loss = config.loss;
  if (w.classifier == "threshold") {
    wc.classifier = [](const EnsembleOutput& e) { return std::string(to_string(classify_ensemble(e))); };
  }
  return wc;
}

}  // namespace sloppy
