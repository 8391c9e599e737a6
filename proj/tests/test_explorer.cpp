#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "sloppy/builtin_models.hpp"
#include "sloppy/explorer.hpp"
#include "test_util.hpp"

using namespace sloppy;

namespace {

WalkConfig synthetic_walk(std::size_t seeds, std::uint64_t seed, std::size_t steps = 8) {
  WalkConfig c;
  c.steps = steps;
  c.seed = seed;
  c.simulation = testutil::sim(seeds, 256);
  c.classifier = [](const EnsembleOutput& e) { return std::string(to_string(classify_ensemble(e))); };
  return c;
}

ParameterPoint synthetic_origin(std::size_t nuisance = 0, double a = 0.0, double b = 0.0) {
  std::vector<double> logs{a, b};
  logs.resize(2 + nuisance, 0.0);
  return ParameterPoint::from_log(SyntheticPhaseModel(nuisance).parameter_names(), logs);
}

double binomial_z(std::size_t hits, std::size_t n, double p) {
  const double sd = std::sqrt(n * p * (1.0 - p));
  return std::abs(static_cast<double>(hits) - n * p) / sd;
}

}  // namespace

TEST_CASE("select_direction law") {
  std::mt19937_64 rng(1);
  CHECK(select_direction(3.0, 1.0, rng).probability_first == 0.75);
  std::size_t hits = 0;
  for (int i = 0; i < 10000; ++i) hits += select_direction(3.0, 1.0, rng).index == 1 ? 1 : 0;
  CHECK(binomial_z(hits, 10000, 0.75) < 3.0);

  hits = 0;
  for (int i = 0; i < 10000; ++i) hits += select_direction(2.0, 2.0, rng).index == 1 ? 1 : 0;
  CHECK(binomial_z(hits, 10000, 0.5) < 3.0);

  for (int i = 0; i < 1000; ++i) {
    const auto c = select_direction(1.0, 0.0, rng);
    CHECK(c.index == 1);
    CHECK(c.probability_first == 1.0);
  }
  // Round-off negatives are clamped to zero.
  CHECK(select_direction(1.0, -1e-17, rng).probability_first == 1.0);
  CHECK_ERROR_KIND(select_direction(0.0, 0.0, rng), ErrorKind::DegenerateSpectrum);
  CHECK_ERROR_KIND(select_direction(-1.0, -2.0, rng), ErrorKind::DegenerateSpectrum);
}

TEST_CASE("fix_sign examples") {
  const Eigen::Vector2d prev(1.0, 0.0);
  CHECK(fix_sign(Eigen::Vector2d(-1.0, 0.0), prev) == Eigen::VectorXd(Eigen::Vector2d(1.0, 0.0)));
  CHECK(fix_sign(Eigen::Vector2d(0.0, 1.0), prev) == Eigen::VectorXd(Eigen::Vector2d(0.0, 1.0)));
  const double c = kMaxTurnCosine;
  CHECK(c == doctest::Approx(-0.96593).epsilon(1e-5));
  const Eigen::Vector2d boundary(c, std::sqrt(1.0 - c * c));
  CHECK(boundary.dot(prev) == c);
  CHECK(fix_sign(boundary, prev) == Eigen::VectorXd(boundary));
  const Eigen::Vector2d past(std::nextafter(c, -1.0), std::sqrt(1.0 - c * c));
  CHECK(fix_sign(past, prev) == Eigen::VectorXd(-past));
}

TEST_CASE("step_distance examples") {
  CHECK(step_distance(1.0, 1.0, 0.1, 0.3, 1.0) == 0.3);
  CHECK(step_distance(1e-4, 1e-4, 0.1, 0.3, 1.0) == 1.0);
  CHECK(step_distance(1.0, 100.0, 0.1, 0.3, 1.0) == 1.0);
  CHECK(step_distance(4.0, 4.0, 0.1, 0.3, 10.0) == doctest::Approx(0.3));
  CHECK_ERROR_KIND(step_distance(0.0, 1.0, 0.1, 0.3, 1.0), ErrorKind::DegenerateSpectrum);
  CHECK_ERROR_KIND(step_distance(2.0, 1.0, 0.1, 0.3, 1.0), ErrorKind::DegenerateSpectrum);
}

TEST_CASE("property: step_distance fuzz") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> expo(-8.0, 8.0), frac(1e-6, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double l1 = std::pow(10.0, expo(rng));
    const double lc = l1 * frac(rng);
    const double d = step_distance(lc, l1, 0.1, 0.3, 1.0);
    CHECK(d <= 1.0);
    CHECK(d >= std::min(0.1 / std::sqrt(l1), 1.0));
    CHECK(d == std::min((1.0 / std::sqrt(lc)) * std::max(0.1, 0.3 * std::sqrt(l1)), 1.0));
  }
}

TEST_CASE("walk config validation") {
  WalkConfig c = synthetic_walk(2, 1);
  c.steps = 0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
  c = synthetic_walk(2, 1);
  c.eps = 2.0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
  c = synthetic_walk(2, 1);
  c.eps_min = 0.0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidArgument);
}

TEST_CASE("first-step orientation examples") {
  SyntheticPhaseModel m(1);
  const auto cfg = synthetic_walk(4, 1);
  const Eigen::VectorXd diag = Eigen::Vector3d(1.0, 1.0, 0.0) / std::sqrt(2.0);

  // Towards the a + b = 2 HIGH boundary.
  auto o1 = synthetic_origin(1, 1.5, 0.4);
  auto r1 = run_ensemble(m, o1, cfg.simulation);
  auto up = orient_first_step(m, o1, r1, diag, 0.3, cfg);
  CHECK(up.sign == 1);
  CHECK(up.loss_plus > up.loss_minus);
  CHECK(up.calls == 8);
  // Oracle: the plus candidate is HIGH, the minus candidate stays MID.
  CHECK(synthetic_regime(1.5 + 0.3 / std::sqrt(2.0), 0.4 + 0.3 / std::sqrt(2.0)) == PhaseLabel::High);
  CHECK(synthetic_regime(1.5 - 0.3 / std::sqrt(2.0), 0.4 - 0.3 / std::sqrt(2.0)) == PhaseLabel::Mid);

  // Minus candidate crosses into LOW, plus stays in MID.
  auto o2 = synthetic_origin(1, -0.6, -0.6);
  auto r2 = run_ensemble(m, o2, cfg.simulation);
  auto down = orient_first_step(m, o2, r2, diag, 0.6, cfg);
  CHECK(synthetic_regime(-0.6 - 0.6 / std::sqrt(2.0), -0.6 - 0.6 / std::sqrt(2.0)) == PhaseLabel::Low);
  CHECK(down.sign == -1);

  // A direction the output ignores gives a tie, broken towards +v.
  const Eigen::VectorXd nuisance = Eigen::Vector3d(0.0, 0.0, 1.0);
  auto tie = orient_first_step(m, o2, r2, nuisance, 0.5, cfg);
  CHECK(tie.loss_plus == tie.loss_minus);
  CHECK(tie.sign == 1);
}

TEST_CASE("N = 1 accounting") {
  SyntheticPhaseModel inner(1);
  CountingModel m(inner);
  auto cfg = synthetic_walk(3, 5, 1);
  auto trace = run_walk(m, synthetic_origin(1), cfg);
  REQUIRE(trace.steps.size() == 1);
  const auto& s = trace.steps[0];
  CHECK(s.hessian_calls == 2 * 3 * 3);
  CHECK(s.orientation_calls == 2 * 3);
  CHECK(s.hessian_calls + s.orientation_calls == 2 * 3 * 3 + 2 * 3);
  CHECK(trace.origin_calls == 3);
  CHECK(s.evaluation_calls == 3);
  CHECK(trace.total_calls() == m.calls());
}

TEST_CASE("P=2, S=20, N=8 walk spends exactly 640 Hessian calls") {
  SyntheticPhaseModel inner;
  CountingModel m(inner);
  for (bool reverse : {false, true}) {
    m.reset();
    auto cfg = synthetic_walk(20, 7);
    cfg.reverse_first = reverse;
    auto trace = run_walk(m, synthetic_origin(), cfg);
    REQUIRE(trace.steps.size() == 8);
    CHECK(trace.hessian_calls() == 640);
    CHECK(trace.orientation_calls() == 40);
    CHECK(trace.total_calls() == m.calls());
  }
}

TEST_CASE("walk from the MID origin reaches other phases") {
  SyntheticPhaseModel m;
  std::set<std::string> labels;
  for (bool reverse : {false, true}) {
    auto cfg = synthetic_walk(20, 7);
    cfg.reverse_first = reverse;
    auto trace = run_walk(m, synthetic_origin(), cfg);
    labels.insert(trace.origin_phase);
    for (const auto& s : trace.steps) {
      // Regime oracle at the logged end point.
      CHECK(s.phase == std::string(to_string(synthetic_regime(s.end_log[0], s.end_log[1]))));
      labels.insert(s.phase);
    }
  }
  CHECK(labels.count("MID") == 1);
  CHECK(labels.size() >= 3);
}

TEST_CASE("property: walks never turn by more than 165 degrees and log every step exactly") {
  SyntheticPhaseModel m(1);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto cfg = synthetic_walk(2, seed);
    cfg.classifier = nullptr;
    std::mt19937_64 start(seed);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    auto trace = run_walk(m, synthetic_origin(1, u(start), u(start)), cfg);
    CHECK(!trace.aborted);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
      const auto& s = trace.steps[i];
      const double lc = s.chosen == 1 ? s.lambda1 : s.lambda2;
      CHECK(s.distance == step_distance(lc, s.lambda1, cfg.eps, cfg.eps_min, cfg.eps_max));
      CHECK(s.distance <= cfg.eps_max);
      for (std::size_t k = 0; k < s.end_log.size(); ++k) CHECK(s.end_log[k] == s.start_log[k] + s.distance * s.direction[k]);
      if (i == 0) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < s.direction.size(); ++k) dot += s.direction[k] * trace.steps[i - 1].direction[k];
      CHECK(dot >= kMaxTurnCosine);
      CHECK(s.start_log == trace.steps[i - 1].end_log);
    }
  }
}

TEST_CASE("property: v1 frequency at a fixed point matches the eigenvalue ratio") {
  SyntheticPhaseModel m;
  // One step from just inside the OSC boundary: the finite differences straddle
  // it, so both eigenvalues are positive.
  std::size_t hits = 0;
  double p = 0.0;
  const std::size_t runs = 400;
  auto cfg = synthetic_walk(2, 0, 1);
  cfg.classifier = nullptr;
  cfg.random_sign = true;
  const auto origin = synthetic_origin(0, 1.5, -0.02);
  for (std::size_t seed = 1; seed <= runs; ++seed) {
    cfg.seed = seed;
    auto trace = run_walk(m, origin, cfg);
    REQUIRE(trace.steps.size() == 1);
    hits += trace.steps[0].chosen == 1 ? 1 : 0;
    p = trace.steps[0].probability;
  }
  REQUIRE(p < 1.0);
  CHECK(binomial_z(hits, runs, p) < 3.0);
}

TEST_CASE("walks are reproducible") {
  SyntheticPhaseModel m(1);
  auto cfg = synthetic_walk(3, 42, 5);
  auto a = run_walk(m, synthetic_origin(1), cfg);
  auto b = run_walk(m, synthetic_origin(1), cfg);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(step_to_json(a.steps[i]) == step_to_json(b.steps[i]));
  cfg.simulation.workers = 3;
  auto c = run_walk(m, synthetic_origin(1), cfg);
  for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(step_to_json(a.steps[i]) == step_to_json(c.steps[i]));
}

TEST_CASE("resume continues exactly where an interrupted walk stopped") {
  SyntheticPhaseModel m;
  auto cfg = synthetic_walk(3, 9, 6);
  const auto full = run_walk(m, synthetic_origin(), cfg);
  REQUIRE(full.steps.size() == 6);

  const auto path = std::filesystem::temp_directory_path() / "sloppy_resume_test.jsonl";
  {
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < 3; ++i) out << step_to_json(full.steps[i]).dump() << '\n';
    out << step_to_json(full.steps[3]).dump().substr(0, 40);  // torn write
  }
  const auto partial = read_walk_jsonl(path.string());
  CHECK(partial.size() == 3);
  const auto resumed = run_walk(m, synthetic_origin(), cfg, partial);
  REQUIRE(resumed.steps.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(step_to_json(resumed.steps[i]) == step_to_json(full.steps[i]));
  CHECK(resumed.resume_calls == 3);
  std::filesystem::remove(path);

  auto bad = partial;
  bad[1].index = 7;
  CHECK_ERROR_KIND(run_walk(m, synthetic_origin(), cfg, bad), ErrorKind::InvalidArgument);
}

TEST_CASE("step JSON round trip") {
  SyntheticPhaseModel m;
  auto trace = run_walk(m, synthetic_origin(), synthetic_walk(2, 3, 2));
  for (const auto& s : trace.steps) {
    const auto j = step_to_json(s);
    CHECK(step_to_json(step_from_json(nlohmann::ordered_json::parse(j.dump()))) == j);
    CHECK(j["model_calls"] == s.model_calls());
  }
  CHECK_ERROR_KIND(step_from_json(nlohmann::ordered_json{{"n", 1}}), ErrorKind::ConfigError);
}

TEST_CASE("flat model aborts the walk with the reason recorded") {
  testutil::TableModel flat(1, [](const ParameterPoint&, std::uint64_t, std::size_t, std::size_t) { return 1.0; });
  WalkConfig cfg;
  cfg.simulation = testutil::sim(2, 16);
  std::size_t sunk = 0;
  auto trace = run_walk(flat, make_point({"a", "b"}, {1.0, 2.0}), cfg, {}, [&](const WalkStep&) { ++sunk; });
  CHECK(trace.aborted);
  CHECK(trace.steps.empty());
  CHECK(sunk == 0);
  CHECK(trace.abort_reason.find("step 1") != std::string::npos);
}
