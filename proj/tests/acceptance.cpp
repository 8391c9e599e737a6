// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "sloppy/builtin_models.hpp"
#include "sloppy/commands.hpp"
#include "sloppy/config.hpp"
#include "sloppy/error.hpp"
#include "sloppy/explorer.hpp"
#include "sloppy/external_model.hpp"
#include "sloppy/fisher.hpp"
#include "sloppy/loss.hpp"
#include "sloppy/spectral.hpp"

using namespace sloppy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SimulationConfig sim(std::size_t seeds, std::size_t steps) {
  SimulationConfig c;
  c.seeds = SimulationConfig::seed_range(1, seeds);
  c.steps = steps;
  return c;
}

ParameterPoint coeffs(std::vector<double> p) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < p.size(); ++i) names.push_back("p" + std::to_string(i));
  return ParameterPoint::linear_only(names, std::move(p));
}

ParameterPoint synthetic_point(std::size_t nuisance, double a, double b) {
  std::vector<double> logs{a, b};
  logs.resize(2 + nuisance, 0.0);
  return ParameterPoint::from_log(SyntheticPhaseModel(nuisance).parameter_names(), logs);
}

WalkConfig synthetic_walk_config(std::size_t seeds, std::uint64_t seed) {
  WalkConfig c;
  c.steps = 8;
  c.seed = seed;
  c.simulation = sim(seeds, 512);
  c.classifier = [](const EnsembleOutput& e) { return std::string(to_string(classify_ensemble(e))); };
  return c;
}

Outcome hilbert() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::size_t degree = 0; degree <= 3; ++degree) {
    PolynomialModel m(degree, midpoint_grid(2000));
    auto est = estimate_fisher(m, coeffs(std::vector<double>(degree + 1, 1.0)), sim(1, 2000),
                               DiffSettings{DiffMode::Linear, std::nullopt}, MseLoss{Normalization::Unit});
    for (std::size_t i = 0; i <= degree; ++i) {
      for (std::size_t j = 0; j <= degree; ++j) {
        const double target = 1.0 / static_cast<double>(i + j + 1);
        const double got = est.fisher.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        worst = std::max(worst, std::abs(got - target) / target);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 5.0, "max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome psd() {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;  // most negative min eigenvalue relative to lambda1
  for (int trial = 0; trial < 100; ++trial) {
    std::unique_ptr<SimulationModel> model;
    ParameterPoint point;
    SimulationConfig c;
    DiffSettings diff;
    LossKind loss = MseLoss{};
    switch (trial % 3) {
      case 0: {
        const std::size_t degree = 1 + static_cast<std::size_t>(trial % 5);
        model = std::make_unique<PolynomialModel>(degree, midpoint_grid(100), 0.1);
        std::vector<double> p;
        for (std::size_t i = 0; i <= degree; ++i) p.push_back(z(rng));
        point = coeffs(p);
        c = sim(3, 100);
        diff = DiffSettings{DiffMode::Linear, std::nullopt};
        loss = MseLoss{Normalization::Unit};
        break;
      }
      case 1: {
        const std::size_t nuisance = static_cast<std::size_t>(trial % 4);
        model = std::make_unique<SyntheticPhaseModel>(nuisance);
        point = synthetic_point(nuisance, u(rng), u(rng));
        c = sim(3, 256);
        break;
      }
      default: {
        model = std::make_unique<GaussianToyModel>();
        point = make_point({"phi1", "phi2"}, {std::exp(u(rng)) + 1.0, std::exp(u(rng))});
        c = sim(2, 200);
        loss = MseLoss{Normalization::Std};
        break;
      }
    }
    c.seeds = SimulationConfig::seed_range(1 + 10 * static_cast<std::uint64_t>(trial), c.seeds.size());
    const auto est = estimate_fisher(*model, point, c, diff, loss);
    const auto s = eigendecompose(est.fisher);
    const double l1 = s.eigenvalues[0];
    const double lmin = s.eigenvalues[s.eigenvalues.size() - 1];
    if (l1 > 0.0) worst = std::min(worst, lmin / l1);
    if (lmin < -1e-10 * l1 || (l1 <= 0.0 && lmin < 0.0)) {
      return {false, "trial " + std::to_string(trial) + " min eigenvalue " + fmt("%.3e", lmin)};
    }
  }
  return {true, "100 trials, worst min/lambda1 " + fmt("%.2e", worst)};
}

Outcome fisher_vs_hessian() {
  PolynomialModel m(3, midpoint_grid(500));
  const auto p = coeffs({0.4, -1.2, 0.8, 2.0});
  const auto c = sim(1, 500);
  const DiffSettings diff{DiffMode::Linear, std::nullopt};
  const auto est = estimate_fisher(m, p, c, diff, MseLoss{Normalization::Unit});
  EnsembleLoss mse = [](const EnsembleOutput& r, const EnsembleOutput& x) {
    return time_series_loss(MseLoss{Normalization::Unit}, r, x);
  };
  const auto direct = full_hessian_fd(mse, m, p, c, diff);
  const double rel = (direct - est.fisher.entries).norm() / est.fisher.entries.norm();
  return {rel < 1e-4, "relative Frobenius distance " + fmt("%.2e", rel)};
}

Outcome kl_fisher() {
  GaussianToyModel m;
  const auto p = make_point({"phi1", "phi2"}, {1.0, 1.0});
  const auto c = sim(1, 100000);
  SklLoss cfg;
  cfg.bins = 64;
  const auto f = fisher_from_histograms(m, p, c, 0.1, cfg);
  EnsembleLoss skl = [cfg](const EnsembleOutput& r, const EnsembleOutput& x) { return skl_loss(r, x, cfg); };
  const auto direct = full_hessian_fd(skl, m, p, c, DiffSettings{DiffMode::Log, 0.1});
  const double e00 = std::abs(f.entries(0, 0) - 0.5) / 0.5;
  const double e11 = std::abs(f.entries(1, 1) - 1.0) / 1.0;
  const double off = std::abs(f.entries(0, 1));
  double fd = 0.0;
  for (Eigen::Index i = 0; i < 2; ++i) fd = std::max(fd, std::abs(direct(i, i) - f.entries(i, i)) / f.entries(i, i));
  const double fd_off = std::abs(direct(0, 1) - f.entries(0, 1)) / f.entries.diagonal().maxCoeff();
  const bool ok = e00 <= 0.05 && e11 <= 0.05 && off < 0.05 && fd <= 0.05 && fd_off <= 0.05;
  return {ok, "F = [" + fmt("%.4f", f.entries(0, 0)) + ", " + fmt("%.4f", f.entries(0, 1)) + "; " +
                  fmt("%.4f", f.entries(1, 1)) + "], FD Hessian deviation " + fmt("%.3f", fd)};
}

Outcome loss_sanity() {
  SyntheticPhaseModel m;
  const auto e = run_ensemble(m, synthetic_point(0, 2.0, -1.0), sim(5, 256));
  const auto same = run_ensemble(m, synthetic_point(0, 2.0, -1.0), sim(5, 256));
  const double mse = time_series_loss(MseLoss{}, e, same);
  const double mspe = time_series_loss(MspeLoss{}, e, same);
  const double lc = time_series_loss(LogCoshLoss{}, e, same);
  bool divergent = false;
  try {
    (void)time_series_loss(LogAbsLoss{}, e, same);
  } catch (const Error& err) {
    divergent = err.kind() == ErrorKind::Divergent;
  }
  const double skl = skl_loss(e, same, SklLoss{});
  const bool ok = mse == 0.0 && mspe == 0.0 && lc == 0.0 && divergent && skl <= 1e-10;
  return {ok, "mse/mspe/logcosh " + fmt("%g", mse + mspe + lc) + ", logabs " +
                  (divergent ? "Divergent" : "no error") + ", skl " + fmt("%.1e", skl)};
}

Outcome direction_law() {
  std::mt19937_64 rng(12345);
  std::size_t hits = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) hits += select_direction(3.0, 1.0, rng).index == 1 ? 1 : 0;
  const double freq = static_cast<double>(hits) / n;
  const double sigma = std::sqrt(0.75 * 0.25 / n);
  return {std::abs(freq - 0.75) <= 3.0 * sigma, "frequency " + fmt("%.4f", freq) + " (3 sigma " + fmt("%.4f", 3 * sigma) + ")"};
}

Outcome step_size() {
  bool ok = step_distance(1.0, 1.0, 0.1, 0.3, 1.0) == 0.3 && step_distance(1e-4, 1e-4, 0.1, 0.3, 1.0) == 1.0 &&
            step_distance(1.0, 100.0, 0.1, 0.3, 1.0) == 1.0;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> expo(-8.0, 8.0), frac(1e-6, 1.0);
  std::size_t bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double l1 = std::pow(10.0, expo(rng));
    const double lc = l1 * frac(rng);
    const double d = step_distance(lc, l1, 0.1, 0.3, 1.0);
    const double closed = std::min((1.0 / std::sqrt(lc)) * std::max(0.1, 0.3 * std::sqrt(l1)), 1.0);
    if (!(d <= 1.0) || d != closed) ++bad;
  }
  ok = ok && bad == 0;
  return {ok, "3 worked cases, " + std::to_string(bad) + " fuzz violations in 10000"};
}

Outcome sign_consistency() {
  SyntheticPhaseModel m(1);
  double worst = 1.0;
  std::size_t transitions = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto cfg = synthetic_walk_config(2, seed);
    cfg.simulation.steps = 256;
    cfg.classifier = nullptr;
    std::mt19937_64 start(seed);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const auto trace = run_walk(m, synthetic_point(1, u(start), u(start)), cfg);
    for (std::size_t i = 1; i < trace.steps.size(); ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < trace.steps[i].direction.size(); ++k) {
        dot += trace.steps[i].direction[k] * trace.steps[i - 1].direction[k];
      }
      worst = std::min(worst, dot);
      ++transitions;
    }
  }
  const double angle = std::acos(std::clamp(worst, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  return {worst >= kMaxTurnCosine && transitions > 0,
          std::to_string(transitions) + " turns, largest " + fmt("%.1f", angle) + " deg"};
}

Outcome phase_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_run_config(std::string(SLOPPY_CONFIG_DIR) + "/synthetic_walk.json");
  const auto model = make_model(cfg);
  std::set<std::string> labels;
  bool oracle = true;
  for (bool reverse : {false, true}) {
    auto wc = make_walk_config(cfg);
    wc.reverse_first = reverse;
    const auto trace = run_walk(*model, cfg.parameters, wc);
    labels.insert(trace.origin_phase);
    oracle = oracle && trace.origin_phase == to_string(synthetic_regime(cfg.parameters.log()[0], cfg.parameters.log()[1]));
    for (const auto& s : trace.steps) {
      labels.insert(s.phase);
      oracle = oracle && s.phase == to_string(synthetic_regime(s.end_log[0], s.end_log[1]));
    }
  }
  const double secs = seconds_since(t0);
  std::string list;
  for (const auto& l : labels) list += (list.empty() ? "" : ",") + l;
  return {labels.size() >= 3 && oracle && secs < 60.0,
          "labels {" + list + "}, oracle " + (oracle ? "agrees" : "disagrees") + ", " + fmt("%.2f", secs) + " s"};
}

Outcome cost_accounting() {
  SyntheticPhaseModel inner;
  CountingModel m(inner);
  auto cfg = synthetic_walk_config(20, 7);
  const auto trace = run_walk(m, synthetic_point(0, 0.0, 0.0), cfg);
  const bool ok = trace.steps.size() == 8 && trace.hessian_calls() == 640 && trace.total_calls() == m.calls();
  return {ok, std::to_string(trace.hessian_calls()) + " Hessian calls, orientation " +
                  std::to_string(trace.orientation_calls()) + ", total " + std::to_string(m.calls())};
}

Outcome external_transparency() {
  ExternalModelSpec spec;
  spec.executable = std::string(SLOPPY_TEST_DATA) + "/echo_polynomial.py";
  spec.parameter_names = {"p0", "p1", "p2", "p3"};
  spec.variables = {"f"};
  ExternalModel ext(spec);
  PolynomialModel builtin(3, midpoint_grid(64));
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 2.0);
  const auto c = sim(1, 64);
  const DiffSettings diff{DiffMode::Linear, std::nullopt};
  std::size_t identical = 0;
  for (int draw = 0; draw < 20; ++draw) {
    const auto p = coeffs({z(rng), z(rng), z(rng), z(rng)});
    const auto a = estimate_fisher(builtin, p, c, diff, MseLoss{Normalization::Unit});
    const auto b = estimate_fisher(ext, p, c, diff, MseLoss{Normalization::Unit});
    const auto sa = eigendecompose(a.fisher);
    const auto sb = eigendecompose(b.fisher);
    if (a.fisher.entries == b.fisher.entries && sa.eigenvalues == sb.eigenvalues && sa.eigenvectors == sb.eigenvectors) {
      ++identical;
    }
  }
  return {identical == 20, std::to_string(identical) + "/20 draws bit-identical"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "sloppy_acceptance_determinism";
  const std::string configs = SLOPPY_CONFIG_DIR;
  struct Job {
    std::string name;
    std::function<void(const CommandOptions&)> run;
  };
  std::vector<Job> jobs = {
      {"spectrum",
       [&](const CommandOptions& o) {
         auto opts = o;
         opts.dump_ensembles = true;
         (void)cmd_spectrum(load_run_config(configs + "/synthetic_nuisance.json"), opts);
       }},
      {"spectrum-skl", [&](const CommandOptions& o) { (void)cmd_spectrum(load_run_config(configs + "/gaussian_skl.json"), o); }},
      {"explore", [&](const CommandOptions& o) { (void)cmd_explore(load_run_config(configs + "/synthetic_walk.json"), o); }},
      {"validate", [&](const CommandOptions& o) { (void)cmd_validate(o); }},
      {"wishart", [&](const CommandOptions& o) { (void)cmd_wishart(8, 64, 200, o); }},
  };
  std::size_t compared = 0;
  for (const auto& job : jobs) {
    const auto dir = root / job.name;
    CommandOptions o;
    o.out = dir.string();
    fs::remove_all(dir);
    job.run(o);
    const auto first = snapshot(dir);
    fs::remove_all(dir);
    job.run(o);
    const auto second = snapshot(dir);
    if (first != second || first.empty()) {
      fs::remove_all(root);
      return {false, job.name + " output differs between runs"};
    }
    compared += first.size();
  }
  fs::remove_all(root);
  return {true, std::to_string(jobs.size()) + " commands, " + std::to_string(compared) + " files byte-identical"};
}

Outcome wishart() {
  const auto v = wishart_null(8, 64, 200, 1);
  const auto [lo, hi] = marchenko_pastur_support(8, 64);
  std::size_t inside = 0;
  for (double x : v) inside += (x >= lo - 0.1 && x <= hi + 0.1) ? 1 : 0;
  const double frac = static_cast<double>(inside) / static_cast<double>(v.size());
  return {v.size() == 1600 && frac >= 0.99, fmt("%.2f%%", 100.0 * frac) + " of 1600 inside widened support"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"Hilbert convergence", hilbert},
      {"PSD by construction", psd},
      {"Fisher equals direct Hessian at optimum", fisher_vs_hessian},
      {"KL Hessian equals Fisher form", kl_fisher},
      {"Loss sanity", loss_sanity},
      {"Direction-selection law", direction_law},
      {"Step-size formula", step_size},
      {"Sign consistency", sign_consistency},
      {"Phase recovery", phase_recovery},
      {"Cost accounting", cost_accounting},
      {"External-adapter transparency", external_transparency},
      {"Determinism", determinism},
      {"Wishart null", wishart},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
