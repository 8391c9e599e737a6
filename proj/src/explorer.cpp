#include "sloppy/explorer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sloppy/error.hpp"
#include "sloppy/spectral.hpp"

namespace sloppy {

void WalkConfig::validate() const {
  if (steps < 1) throw Error(ErrorKind::InvalidArgument, "walk needs N >= 1 steps");
  if (!(eps > 0.0 && eps <= eps_max)) throw Error(ErrorKind::InvalidArgument, "need 0 < eps <= eps_max");
  if (!(eps_min > 0.0 && eps_min <= eps_max)) throw Error(ErrorKind::InvalidArgument, "need 0 < eps_min <= eps_max");
  simulation.validate();
}

DirectionChoice select_direction(double lambda1, double lambda2, std::mt19937_64& rng) {
  if (!(lambda1 > 0.0)) throw Error(ErrorKind::DegenerateSpectrum, "lambda1 = " + std::to_string(lambda1));
  const double l2 = std::max(lambda2, 0.0);
  if (l2 > lambda1) throw Error(ErrorKind::InvalidArgument, "eigenvalues must satisfy lambda1 >= lambda2");
  const double p = lambda1 / (lambda1 + l2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  return {draw < p ? 1 : 2, p};
}

Eigen::VectorXd fix_sign(const Eigen::VectorXd& v, const Eigen::VectorXd& v_prev) {
  return v.dot(v_prev) >= kMaxTurnCosine ? v : Eigen::VectorXd(-v);
}

double step_distance(double lambda_chosen, double lambda1, double eps, double eps_min, double eps_max) {
  if (!(lambda_chosen > 0.0) || lambda1 < lambda_chosen) {
    throw Error(ErrorKind::DegenerateSpectrum, "step needs 0 < lambda_chosen <= lambda1");
  }
  return std::min((1.0 / std::sqrt(lambda_chosen)) * std::max(eps, eps_min * std::sqrt(lambda1)), eps_max);
}

namespace {

ParameterPoint moved(const ParameterPoint& from, const Eigen::VectorXd& direction, double d) {
  auto x = from.log();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += d * direction[static_cast<Eigen::Index>(i)];
  return from.with_log(std::move(x));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Orientation orient_first_step(const SimulationModel& model, const ParameterPoint& origin,
                              const EnsembleOutput& origin_ensemble, const Eigen::VectorXd& v, double d,
                              const WalkConfig& config) {
  Orientation o;
  const auto plus = run_ensemble(model, moved(origin, v, d), config.simulation);
  const auto minus = run_ensemble(model, moved(origin, v, -d), config.simulation);
  o.calls = 2 * config.simulation.seeds.size();
  o.loss_plus = evaluate_loss(config.loss, origin_ensemble, plus);
  o.loss_minus = evaluate_loss(config.loss, origin_ensemble, minus);
  o.sign = o.loss_plus >= o.loss_minus ? 1 : -1;
  return o;
}

nlohmann::ordered_json step_to_json(const WalkStep& s) {
  nlohmann::ordered_json j;
  j["n"] = s.index;
  j["start_log"] = s.start_log;
  j["lambda1"] = s.lambda1;
  j["lambda2"] = s.lambda2;
  j["v1"] = s.v1;
  j["v2"] = s.v2;
  j["chosen"] = s.chosen;
  j["probability_v1"] = s.probability;
  j["sign_flipped"] = s.sign_flipped;
  j["direction"] = s.direction;
  j["distance"] = s.distance;
  j["end_log"] = s.end_log;
  j["loss_vs_origin"] = s.loss_vs_origin;
  j["phase"] = s.phase;
  j["hessian_calls"] = s.hessian_calls;
  j["orientation_calls"] = s.orientation_calls;
  j["evaluation_calls"] = s.evaluation_calls;
  j["model_calls"] = s.model_calls();
  return j;
}

WalkStep step_from_json(const nlohmann::ordered_json& j) {
  WalkStep s;
  try {
    s.index = j.at("n").get<std::size_t>();
    s.start_log = j.at("start_log").get<std::vector<double>>();
    s.lambda1 = j.at("lambda1").get<double>();
    s.lambda2 = j.at("lambda2").get<double>();
    s.v1 = j.at("v1").get<std::vector<double>>();
    s.v2 = j.at("v2").get<std::vector<double>>();
    s.chosen = j.at("chosen").get<int>();
    s.probability = j.at("probability_v1").get<double>();
    s.sign_flipped = j.at("sign_flipped").get<bool>();
    s.direction = j.at("direction").get<std::vector<double>>();
    s.distance = j.at("distance").get<double>();
    s.end_log = j.at("end_log").get<std::vector<double>>();
    s.loss_vs_origin = j.at("loss_vs_origin").get<double>();
    s.phase = j.at("phase").get<std::string>();
    s.hessian_calls = j.at("hessian_calls").get<std::size_t>();
    s.orientation_calls = j.at("orientation_calls").get<std::size_t>();
    s.evaluation_calls = j.at("evaluation_calls").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed walk step: ") + e.what());
  }
  return s;
}

std::size_t WalkTrace::hessian_calls() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.hessian_calls;
  return n;
}

std::size_t WalkTrace::orientation_calls() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.orientation_calls;
  return n;
}

std::size_t WalkTrace::total_calls() const {
  std::size_t n = origin_calls + resume_calls;
  for (const auto& s : steps) n += s.model_calls();
  return n;
}

WalkTrace run_walk(const SimulationModel& model, const ParameterPoint& origin, const WalkConfig& config,
                   const std::vector<WalkStep>& resume_from, const StepSink& sink) {
  config.validate();
  const std::size_t p = origin.size();
  const std::size_t s_count = config.simulation.seeds.size();

  WalkTrace trace;
  trace.names = origin.names();
  trace.origin_log = origin.log();
  const auto origin_ensemble = run_ensemble(model, origin, config.simulation);
  trace.origin_calls = s_count;
  if (config.classifier) trace.origin_phase = config.classifier(origin_ensemble);

  ParameterPoint current = origin;
  EnsembleOutput current_ref = origin_ensemble;
  std::optional<Eigen::VectorXd> previous;

  if (resume_from.size() > config.steps) {
    throw Error(ErrorKind::InvalidArgument, "resume trace is longer than the configured walk");
  }
  for (std::size_t i = 0; i < resume_from.size(); ++i) {
    const auto& step = resume_from[i];
    if (step.index != i + 1 || step.end_log.size() != p || step.direction.size() != p) {
      throw Error(ErrorKind::InvalidArgument, "resume trace is inconsistent at step " + std::to_string(i + 1));
    }
    trace.steps.push_back(step);
  }
  if (!resume_from.empty()) {
    current = origin.with_log(resume_from.back().end_log);
    previous = to_eigen(resume_from.back().direction);
    current_ref = run_ensemble(model, current, config.simulation);
    trace.resume_calls = s_count;
  }

  for (std::size_t n = trace.steps.size() + 1; n <= config.steps; ++n) {
    // Per-step stream, so a resumed walk draws exactly what an uninterrupted one would.
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(n)};
    std::mt19937_64 rng(seq);

    WalkStep step;
    step.index = n;
    step.start_log = current.log();

    const auto est = estimate_fisher(model, current, config.simulation, config.diff, config.loss, &current_ref);
    step.hessian_calls = est.derivative_calls;
    const auto spectrum = eigendecompose(est.fisher);
    step.lambda1 = spectrum.eigenvalues[0];
    step.lambda2 = p > 1 ? std::max(spectrum.eigenvalues[1], 0.0) : 0.0;
    step.v1 = to_std(spectrum.eigenvectors.col(0));
    step.v2 = p > 1 ? to_std(spectrum.eigenvectors.col(1)) : std::vector<double>(p, 0.0);

    DirectionChoice choice;
    try {
      choice = select_direction(step.lambda1, step.lambda2, rng);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateSpectrum) throw;
      trace.aborted = true;
      trace.abort_reason = std::string("step ") + std::to_string(n) + ": " + e.what();
      break;
    }
    step.chosen = choice.index;
    step.probability = choice.probability_first;
    const Eigen::VectorXd v = spectrum.eigenvectors.col(choice.index - 1);
    const double lambda_chosen = choice.index == 1 ? step.lambda1 : step.lambda2;
    step.distance = step_distance(lambda_chosen, step.lambda1, config.eps, config.eps_min, config.eps_max);

    Eigen::VectorXd direction = v;
    if (config.random_sign) {
      std::bernoulli_distribution flip(0.5);
      step.sign_flipped = flip(rng);
    } else if (!previous) {
      const auto o = orient_first_step(model, current, current_ref, v, step.distance, config);
      step.orientation_calls = o.calls;
      const int sign = config.reverse_first ? -o.sign : o.sign;
      step.sign_flipped = sign < 0;
    } else {
      step.sign_flipped = fix_sign(v, *previous).dot(v) < 0.0;
    }
    if (step.sign_flipped) direction = -v;
    step.direction = to_std(direction);

    const auto next = moved(current, direction, step.distance);
    step.end_log = next.log();
    auto next_ref = run_ensemble(model, next, config.simulation);
    step.evaluation_calls = s_count;
    step.loss_vs_origin = evaluate_loss(config.loss, origin_ensemble, next_ref);
    if (config.classifier) step.phase = config.classifier(next_ref);

    trace.steps.push_back(step);
    if (sink) sink(trace.steps.back());
    current = next;
    current_ref = std::move(next_ref);
    previous = direction;
  }
  return trace;
}

std::vector<WalkStep> read_walk_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open walk file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<WalkStep> steps;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) break;  // unterminated tail: an interrupted write
    const std::string line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::ConfigError, "corrupt line in walk file '" + path + "'");
    }
    steps.push_back(step_from_json(j));
  }
  return steps;
}

}  // namespace sloppy
