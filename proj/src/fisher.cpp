#include "sloppy/fisher.hpp"

#include <algorithm>
#include <cmath>

#include "sloppy/error.hpp"

namespace sloppy {

std::string to_string(DiffMode mode) { return mode == DiffMode::Log ? "log" : "linear"; }

DiffMode diff_mode_from_string(const std::string& name) {
  if (name == "log") return DiffMode::Log;
  if (name == "linear") return DiffMode::Linear;
  throw Error(ErrorKind::InvalidArgument, "unknown differentiation mode '" + name + "'");
}

std::vector<double> axis_steps(const ParameterPoint& params, const DiffSettings& diff) {
  if (diff.h && !(*diff.h > 0.0)) throw Error(ErrorKind::InvalidArgument, "step h must be > 0");
  std::vector<double> steps(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (diff.h) {
      steps[i] = *diff.h;
    } else if (diff.mode == DiffMode::Log) {
      steps[i] = kDefaultLogStep;
    } else {
      steps[i] = 1e-4 * std::max(1.0, std::abs(params.linear()[i]));
    }
  }
  return steps;
}

namespace {

PerturbationPair endpoints(const ParameterPoint& params, std::size_t axis, double h, DiffMode mode) {
  return mode == DiffMode::Log ? perturb(params, axis, h) : perturb_linear(params, axis, h);
}

struct PerturbedRuns {
  std::vector<EnsembleOutput> plus;
  std::vector<EnsembleOutput> minus;
  std::vector<double> steps;
};

// The 2P ensembles are independent; they run concurrently when the model
// allows it, each with a serial inner seed loop. Results are stored by axis.
PerturbedRuns run_perturbed(const SimulationModel& model, const ParameterPoint& params,
                            const SimulationConfig& config, const DiffSettings& diff) {
  config.validate();
  if (diff.mode == DiffMode::Log) (void)params.log();
  const std::size_t p = params.size();
  PerturbedRuns runs;
  runs.steps = axis_steps(params, diff);
  runs.plus.resize(p);
  runs.minus.resize(p);
  std::vector<PerturbationPair> pairs;
  pairs.reserve(p);
  for (std::size_t i = 0; i < p; ++i) pairs.push_back(endpoints(params, i, runs.steps[i], diff.mode));

  SimulationConfig inner = config;
  const bool outer_parallel = model.thread_safe() && config.workers > 1 && 2 * p > 1;
  if (outer_parallel) inner.workers = 1;
  parallel_for(2 * p, outer_parallel ? config.workers : 1, [&](std::size_t job) {
    const std::size_t i = job / 2;
    if (job % 2 == 0) {
      runs.plus[i] = run_ensemble(model, pairs[i].plus, inner);
    } else {
      runs.minus[i] = run_ensemble(model, pairs[i].minus, inner);
    }
  });
  return runs;
}

JacobianTensor jacobian_from_runs(const PerturbedRuns& runs, DiffMode mode, std::vector<std::string> names) {
  JacobianTensor j;
  j.names = std::move(names);
  const auto& first = runs.plus.at(0);
  j.seeds = first.seeds();
  j.variables = first.variables();
  j.steps = first.steps();
  j.params = runs.plus.size();
  j.mode = mode;
  j.step = runs.steps;
  j.values.assign(j.seeds * j.variables * j.steps * j.params, 0.0);
  for (std::size_t i = 0; i < j.params; ++i) {
    const auto& up = runs.plus[i].values();
    const auto& down = runs.minus[i].values();
    const double inv = 1.0 / (2.0 * runs.steps[i]);
    for (std::size_t a = 0; a < up.size(); ++a) j.values[a * j.params + i] = (up[a] - down[a]) * inv;
  }
  return j;
}

void require_compatible(const JacobianTensor& j, const EnsembleOutput& reference) {
  if (j.seeds != reference.seeds() || j.variables != reference.variables() || j.steps != reference.steps()) {
    throw Error(ErrorKind::ShapeMismatch, "Jacobian and reference ensemble shapes differ");
  }
}

// sum over (s, k, t) of w_skt J_i J_j, then scaled; upper triangle mirrored.
template <typename Weight>
Eigen::MatrixXd accumulate_outer(const JacobianTensor& j, Weight&& weight, double scale) {
  const std::size_t p = j.params;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t s = 0; s < j.seeds; ++s) {
    for (std::size_t k = 0; k < j.variables; ++k) {
      for (std::size_t t = 0; t < j.steps; ++t) {
        const double w = weight(s, k, t);
        const double* row = &j.values[((s * j.variables + k) * j.steps + t) * p];
        for (std::size_t a = 0; a < p; ++a) {
          const double wa = w * row[a];
          for (std::size_t b = a; b < p; ++b) h(a, b) += wa * row[b];
        }
      }
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      h(a, b) *= scale;
      h(b, a) = h(a, b);
    }
  }
  return h;
}

nlohmann::ordered_json jacobian_provenance(const JacobianTensor& j) {
  return {{"mode", to_string(j.mode)}, {"h", j.step}, {"S", j.seeds}, {"K", j.variables}, {"T_kept", j.steps}};
}

}  // namespace

JacobianTensor jacobian_central(const SimulationModel& model, const ParameterPoint& params,
                                const SimulationConfig& config, const DiffSettings& diff) {
  if (params.size() == 0) throw Error(ErrorKind::InvalidArgument, "no parameters to differentiate");
  return jacobian_from_runs(run_perturbed(model, params, config, diff), diff.mode, params.names());
}

FisherMatrix fisher_from_jacobian(const JacobianTensor& jacobian, const EnsembleOutput& reference,
                                  Normalization normalization) {
  require_compatible(jacobian, reference);
  std::vector<double> inv_norm2(reference.seeds() * reference.variables());
  for (std::size_t s = 0; s < reference.seeds(); ++s) {
    for (std::size_t k = 0; k < reference.variables(); ++k) {
      const double n = series_norm(reference.series(s, k), normalization);
      inv_norm2[s * reference.variables() + k] = 1.0 / (n * n);
    }
  }
  const double count = static_cast<double>(jacobian.seeds * jacobian.variables * jacobian.steps);
  FisherMatrix f;
  f.entries = accumulate_outer(
      jacobian, [&](std::size_t s, std::size_t k, std::size_t) { return inv_norm2[s * jacobian.variables + k]; },
      1.0 / count);
  f.names = jacobian.names;
  f.provenance = jacobian_provenance(jacobian);
  f.provenance["loss"] = loss_to_json(MseLoss{normalization});
  return f;
}

FisherMatrix fisher_from_jacobian(const JacobianTensor& jacobian, const EnsembleOutput& reference,
                                  const LossKind& loss) {
  require_compatible(jacobian, reference);
  const double count = static_cast<double>(jacobian.seeds * jacobian.variables * jacobian.steps);
  FisherMatrix f;
  if (const auto* mse = std::get_if<MseLoss>(&loss)) {
    return fisher_from_jacobian(jacobian, reference, mse->normalization);
  } else if (std::holds_alternative<MspeLoss>(loss)) {
    for (double y : reference.values()) {
      if (y == 0.0) throw Error(ErrorKind::ZeroReference, "mspe Hessian needs a nonzero reference everywhere");
    }
    f.entries = accumulate_outer(
        jacobian,
        [&](std::size_t s, std::size_t k, std::size_t t) {
          const double y = reference(s, k, t);
          return 1.0 / (y * y);
        },
        2.0 / count);
  } else if (std::holds_alternative<LogCoshLoss>(loss)) {
    f.entries = accumulate_outer(jacobian, [](std::size_t, std::size_t, std::size_t) { return 1.0; }, 1.0 / count);
  } else if (std::holds_alternative<LogAbsLoss>(loss)) {
    throw Error(ErrorKind::Divergent, "log-abs loss has no finite Hessian at the reference point");
  } else {
    throw Error(ErrorKind::InvalidArgument, "skl Hessian needs histogram runs; use fisher_from_histograms");
  }
  f.names = jacobian.names;
  f.provenance = jacobian_provenance(jacobian);
  f.provenance["loss"] = loss_to_json(loss);
  return f;
}

FisherMatrix fisher_from_histogram_runs(const EnsembleOutput& reference, std::span<const EnsembleOutput> plus,
                                        std::span<const EnsembleOutput> minus, std::span<const double> steps,
                                        const SklLoss& config, std::vector<std::string> names) {
  const std::size_t p = plus.size();
  if (minus.size() != p || steps.size() != p || names.size() != p) {
    throw Error(ErrorKind::ShapeMismatch, "histogram Fisher needs one plus/minus run and step per parameter");
  }
  for (std::size_t i = 0; i < p; ++i) {
    if (!reference.same_shape(plus[i]) || !reference.same_shape(minus[i])) {
      throw Error(ErrorKind::ShapeMismatch, "perturbed ensemble shape differs from reference");
    }
  }
  const auto edges = reference_edges(reference, config);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  std::vector<std::vector<double>> dp(p);
  for (std::size_t s = 0; s < reference.seeds(); ++s) {
    for (std::size_t k = 0; k < reference.variables(); ++k) {
      const FixedEdges shared{edges[k]};
      const auto base = histogram_pdf(prepared_series(reference, s, k, config.mean_center), shared, config.bins,
                                      config.pseudo_count);
      for (std::size_t i = 0; i < p; ++i) {
        const auto up = histogram_pdf(prepared_series(plus[i], s, k, config.mean_center), shared, config.bins,
                                      config.pseudo_count);
        const auto down = histogram_pdf(prepared_series(minus[i], s, k, config.mean_center), shared, config.bins,
                                        config.pseudo_count);
        dp[i].resize(base.mass.size());
        for (std::size_t b = 0; b < base.mass.size(); ++b) dp[i][b] = (up.mass[b] - down.mass[b]) / (2.0 * steps[i]);
      }
      for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t c = a; c < p; ++c) {
          double sum = 0.0;
          for (std::size_t b = 0; b < base.mass.size(); ++b) sum += dp[a][b] * dp[c][b] / base.mass[b];
          h(a, c) += sum;
        }
      }
    }
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(reference.seeds() * reference.variables()));
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t c = a; c < p; ++c) {
      h(a, c) *= scale;
      h(c, a) = h(a, c);
    }
  }
  FisherMatrix f;
  f.entries = std::move(h);
  f.names = std::move(names);
  f.provenance = {{"h", std::vector<double>(steps.begin(), steps.end())},
                  {"S", reference.seeds()},
                  {"K", reference.variables()},
                  {"T_kept", reference.steps()},
                  {"loss", loss_to_json(config)}};
  return f;
}

FisherMatrix fisher_from_histograms(const SimulationModel& model, const ParameterPoint& params,
                                    const SimulationConfig& config, double h, const SklLoss& kl_config) {
  const DiffSettings diff{DiffMode::Log, h};
  const auto reference = run_ensemble(model, params, config);
  const auto runs = run_perturbed(model, params, config, diff);
  auto f = fisher_from_histogram_runs(reference, runs.plus, runs.minus, runs.steps, kl_config, params.names());
  f.provenance["mode"] = to_string(DiffMode::Log);
  return f;
}

double mixed_central_difference(const Objective& f, std::size_t p, std::size_t i, std::size_t j, double hi,
                                double hj) {
  std::vector<double> d(p, 0.0);
  auto at = [&](double di, double dj) {
    std::fill(d.begin(), d.end(), 0.0);
    d[i] = di;
    d[j] = dj;
    return f(d);
  };
  return (at(hi, hj) - at(hi, -hj) - at(-hi, hj) + at(-hi, -hj)) / (4.0 * hi * hj);
}

Eigen::MatrixXd second_difference_hessian(const Objective& f, std::span<const double> steps) {
  const std::size_t p = steps.size();
  Eigen::MatrixXd h(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  std::vector<double> d(p, 0.0);
  const double f0 = f(d);
  for (std::size_t i = 0; i < p; ++i) {
    d[i] = steps[i];
    const double up = f(d);
    d[i] = -steps[i];
    const double down = f(d);
    d[i] = 0.0;
    h(i, i) = (up + down - 2.0 * f0) / (steps[i] * steps[i]);
    for (std::size_t j = 0; j < i; ++j) {
      h(i, j) = mixed_central_difference(f, p, i, j, steps[i], steps[j]);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

Eigen::MatrixXd full_hessian_fd(const EnsembleLoss& loss, const SimulationModel& model,
                                const ParameterPoint& params, const SimulationConfig& config,
                                const DiffSettings& diff) {
  const auto reference = run_ensemble(model, params, config);
  const auto steps = axis_steps(params, diff);
  Objective objective = [&](std::span<const double> delta) {
    if (std::all_of(delta.begin(), delta.end(), [](double x) { return x == 0.0; })) {
      return loss(reference, reference);
    }
    ParameterPoint shifted;
    if (diff.mode == DiffMode::Log) {
      auto x = params.log();
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += delta[i];
      shifted = params.with_log(std::move(x));
    } else {
      auto x = params.linear();
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += delta[i];
      shifted = ParameterPoint::linear_only(params.names(), std::move(x));
    }
    return loss(reference, run_ensemble(model, shifted, config));
  };
  return second_difference_hessian(objective, steps);
}

FisherEstimate estimate_fisher(const SimulationModel& model, const ParameterPoint& params,
                               const SimulationConfig& config, const DiffSettings& diff, const LossKind& loss,
                               const EnsembleOutput* reference) {
  FisherEstimate est;
  if (reference) {
    est.reference = *reference;
  } else {
    est.reference = run_ensemble(model, params, config);
    est.reference_calls = config.seeds.size();
  }
  const auto runs = run_perturbed(model, params, config, diff);
  est.derivative_calls = 2 * params.size() * config.seeds.size();
  if (const auto* skl = std::get_if<SklLoss>(&loss)) {
    est.fisher = fisher_from_histogram_runs(est.reference, runs.plus, runs.minus, runs.steps, *skl, params.names());
    est.fisher.provenance["mode"] = to_string(diff.mode);
  } else {
    est.fisher = fisher_from_jacobian(jacobian_from_runs(runs, diff.mode, params.names()), est.reference, loss);
  }
  est.fisher.names = params.names();
  return est;
}

}  // namespace sloppy
