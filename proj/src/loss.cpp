#include "sloppy/loss.hpp"

#include <algorithm>
#include <cmath>

#include "sloppy/error.hpp"

namespace sloppy {

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::Mean: return "mean";
    case Normalization::Max: return "max";
    case Normalization::Std: return "std";
    case Normalization::Unit: return "unit";
  }
  return "mean";
}

Normalization normalization_from_string(const std::string& name) {
  if (name == "mean") return Normalization::Mean;
  if (name == "max") return Normalization::Max;
  if (name == "std") return Normalization::Std;
  if (name == "unit") return Normalization::Unit;
  throw Error(ErrorKind::InvalidArgument, "unknown normalization '" + name + "'");
}

double series_norm(std::span<const double> series, Normalization n) {
  double value = 1.0;
  switch (n) {
    case Normalization::Unit:
      return 1.0;
    case Normalization::Mean: {
      double sum = 0.0;
      for (double x : series) sum += x;
      value = sum / static_cast<double>(series.size());
      break;
    }
    case Normalization::Max: {
      value = 0.0;
      for (double x : series) value = std::max(value, std::abs(x));
      break;
    }
    case Normalization::Std: {
      double mean = 0.0;
      for (double x : series) mean += x;
      mean /= static_cast<double>(series.size());
      double ss = 0.0;
      for (double x : series) ss += (x - mean) * (x - mean);
      value = std::sqrt(ss / static_cast<double>(series.size()));
      break;
    }
  }
  if (value == 0.0) throw Error(ErrorKind::ZeroNormalization, to_string(n) + " of reference series is zero");
  return value;
}

// --- loss kind <-> json -----------------------------------------------------

namespace {

struct JsonOf {
  nlohmann::ordered_json operator()(const MseLoss& l) const {
    return {{"kind", "mse"}, {"normalization", to_string(l.normalization)}};
  }
  nlohmann::ordered_json operator()(const MspeLoss&) const { return {{"kind", "mspe"}}; }
  nlohmann::ordered_json operator()(const LogCoshLoss&) const { return {{"kind", "logcosh"}}; }
  nlohmann::ordered_json operator()(const LogAbsLoss& l) const {
    return {{"kind", "logabs"}, {"normalization", to_string(l.normalization)}};
  }
  nlohmann::ordered_json operator()(const SklLoss& l) const {
    return {{"kind", "skl"},
            {"bins", l.bins},
            {"pseudo_count", l.pseudo_count},
            {"mean_center", l.mean_center},
            {"include_mean_term", l.include_mean_term}};
  }
};

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigError, path + ": " + what);
}

Normalization read_normalization(const nlohmann::ordered_json& j, const std::string& path) {
  if (!j.contains("normalization")) return Normalization::Mean;
  const auto& v = j.at("normalization");
  if (!v.is_string()) config_error(path + ".normalization", "expected a string");
  try {
    return normalization_from_string(v.get<std::string>());
  } catch (const Error&) {
    config_error(path + ".normalization", "expected one of mean|max|std|unit");
  }
}

}  // namespace

nlohmann::ordered_json loss_to_json(const LossKind& kind) { return std::visit(JsonOf{}, kind); }

std::string loss_name(const LossKind& kind) { return loss_to_json(kind).at("kind").get<std::string>(); }

LossKind loss_from_json(const nlohmann::ordered_json& j, const std::string& path) {
  if (!j.is_object()) config_error(path, "expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) config_error(path + ".kind", "missing or not a string");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "mse") return MseLoss{read_normalization(j, path)};
  if (kind == "mspe") return MspeLoss{};
  if (kind == "logcosh") return LogCoshLoss{};
  if (kind == "logabs") return LogAbsLoss{read_normalization(j, path)};
  if (kind == "skl") {
    SklLoss l;
    if (j.contains("bins")) {
      const auto& b = j.at("bins");
      if (!b.is_number_integer() || b.get<long long>() < 2) config_error(path + ".bins", "must be an integer >= 2");
      l.bins = b.get<std::size_t>();
    }
    if (j.contains("pseudo_count")) {
      const auto& e = j.at("pseudo_count");
      if (!e.is_number() || !(e.get<double>() > 0.0)) config_error(path + ".pseudo_count", "must be > 0");
      l.pseudo_count = e.get<double>();
    }
    if (j.contains("mean_center")) {
      if (!j.at("mean_center").is_boolean()) config_error(path + ".mean_center", "expected a boolean");
      l.mean_center = j.at("mean_center").get<bool>();
    }
    if (j.contains("include_mean_term")) {
      if (!j.at("include_mean_term").is_boolean()) config_error(path + ".include_mean_term", "expected a boolean");
      l.include_mean_term = j.at("include_mean_term").get<bool>();
    }
    return l;
  }
  config_error(path + ".kind", "unknown loss kind '" + kind + "'");
}

// --- histograms -------------------------------------------------------------

std::vector<double> auto_edges(std::span<const double> samples, std::size_t bins) {
  if (samples.empty()) throw Error(ErrorKind::EmptySamples, "cannot build edges from zero samples");
  if (bins < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 bins");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi > lo) {
    const double pad = 0.1 * (hi - lo);
    lo -= pad;
    hi += pad;
  } else {
    const double pad = std::max(0.5 * std::abs(lo), 0.5);
    lo -= pad;
    hi += pad;
  }
  std::vector<double> edges(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + width * static_cast<double>(b);
  edges.back() = hi;
  return edges;
}

HistogramPdf histogram_pdf(std::span<const double> samples, const EdgesPolicy& policy, std::size_t bins,
                           double pseudo_count) {
  if (samples.empty()) throw Error(ErrorKind::EmptySamples, "histogram of zero samples");
  if (!(pseudo_count > 0.0)) throw Error(ErrorKind::InvalidArgument, "pseudo-count must be > 0");
  HistogramPdf pdf;
  if (const auto* fixed = std::get_if<FixedEdges>(&policy)) {
    pdf.edges = fixed->edges;
    if (pdf.edges.size() < 3) throw Error(ErrorKind::InvalidArgument, "need at least 2 bins");
    for (std::size_t b = 1; b < pdf.edges.size(); ++b) {
      if (!(pdf.edges[b] > pdf.edges[b - 1])) throw Error(ErrorKind::InvalidArgument, "edges must be ascending");
    }
  } else {
    pdf.edges = auto_edges(samples, bins);
  }
  const std::size_t n_bins = pdf.edges.size() - 1;
  std::vector<double> counts(n_bins, 0.0);
  for (double x : samples) {
    const auto it = std::upper_bound(pdf.edges.begin(), pdf.edges.end(), x);
    std::size_t b = it == pdf.edges.begin() ? 0 : static_cast<std::size_t>(it - pdf.edges.begin()) - 1;
    b = std::min(b, n_bins - 1);
    counts[b] += 1.0;
  }
  const double total = static_cast<double>(samples.size()) + static_cast<double>(n_bins) * pseudo_count;
  pdf.mass.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) pdf.mass[b] = (counts[b] + pseudo_count) / total;
  return pdf;
}

double kl_divergence(const HistogramPdf& p, const HistogramPdf& q) {
  if (p.edges != q.edges) throw Error(ErrorKind::EdgeMismatch, "histograms use different bin edges");
  double d = 0.0;
  for (std::size_t b = 0; b < p.mass.size(); ++b) d += p.mass[b] * std::log(p.mass[b] / q.mass[b]);
  // Gibbs: clamp round-off below zero.
  return std::max(d, 0.0);
}

double skl_divergence(const HistogramPdf& p, const HistogramPdf& q) {
  return kl_divergence(p, q) + kl_divergence(q, p);
}

// --- ensemble losses --------------------------------------------------------

namespace {

void require_same_shape(const EnsembleOutput& a, const EnsembleOutput& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "reference and candidate ensembles differ in shape");
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

struct TimeSeriesLoss {
  const EnsembleOutput& ref;
  const EnsembleOutput& cand;

  double count() const { return static_cast<double>(ref.seeds() * ref.variables() * ref.steps()); }

  double operator()(const MseLoss& l) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < ref.seeds(); ++s) {
      for (std::size_t k = 0; k < ref.variables(); ++k) {
        const auto r = ref.series(s, k);
        const auto c = cand.series(s, k);
        const double norm = series_norm(r, l.normalization);
        for (std::size_t t = 0; t < r.size(); ++t) {
          const double d = (c[t] - r[t]) / norm;
          sum += d * d;
        }
      }
    }
    return sum / (2.0 * count());
  }

  double operator()(const MspeLoss&) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < ref.seeds(); ++s) {
      for (std::size_t k = 0; k < ref.variables(); ++k) {
        const auto r = ref.series(s, k);
        const auto c = cand.series(s, k);
        for (std::size_t t = 0; t < r.size(); ++t) {
          if (r[t] == 0.0) {
            throw Error(ErrorKind::ZeroReference, "reference is zero at seed index " + std::to_string(s) +
                                                      ", variable " + std::to_string(k) + ", step " +
                                                      std::to_string(t));
          }
          const double d = 1.0 - c[t] / r[t];
          sum += d * d;
        }
      }
    }
    return sum / count();
  }

  double operator()(const LogCoshLoss&) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < ref.seeds(); ++s) {
      for (std::size_t k = 0; k < ref.variables(); ++k) {
        const auto r = ref.series(s, k);
        const auto c = cand.series(s, k);
        for (std::size_t t = 0; t < r.size(); ++t) sum += std::log(std::cosh(c[t] - r[t]));
      }
    }
    return sum / count();
  }

  double operator()(const LogAbsLoss& l) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < ref.seeds(); ++s) {
      for (std::size_t k = 0; k < ref.variables(); ++k) {
        const auto r = ref.series(s, k);
        const auto c = cand.series(s, k);
        const double norm = series_norm(r, l.normalization);
        for (std::size_t t = 0; t < r.size(); ++t) {
          const double d = c[t] - r[t];
          if (d == 0.0) {
            throw Error(ErrorKind::Divergent, "log-abs loss is infinite where candidate equals reference (seed index " +
                                                  std::to_string(s) + ", step " + std::to_string(t) + ")");
          }
          sum += std::log(std::abs(d / norm));
        }
      }
    }
    return -sum / count();
  }

  double operator()(const SklLoss& l) const { return skl_loss(ref, cand, l); }
};

}  // namespace

double time_series_loss(const LossKind& kind, const EnsembleOutput& reference, const EnsembleOutput& candidate) {
  if (std::holds_alternative<SklLoss>(kind)) {
    throw Error(ErrorKind::InvalidArgument, "skl is a distributional loss; use skl_loss");
  }
  require_same_shape(reference, candidate);
  return std::visit(TimeSeriesLoss{reference, candidate}, kind);
}

std::vector<double> prepared_series(const EnsembleOutput& ensemble, std::size_t s, std::size_t k, bool mean_center) {
  const auto span = ensemble.series(s, k);
  std::vector<double> x(span.begin(), span.end());
  if (mean_center) {
    const double m = mean_of(x);
    for (double& v : x) v -= m;
  }
  return x;
}

std::vector<std::vector<double>> reference_edges(const EnsembleOutput& reference, const SklLoss& config) {
  std::vector<std::vector<double>> edges(reference.variables());
  for (std::size_t k = 0; k < reference.variables(); ++k) {
    std::vector<double> pooled;
    pooled.reserve(reference.seeds() * reference.steps());
    for (std::size_t s = 0; s < reference.seeds(); ++s) {
      const auto x = prepared_series(reference, s, k, config.mean_center);
      pooled.insert(pooled.end(), x.begin(), x.end());
    }
    edges[k] = auto_edges(pooled, config.bins);
  }
  return edges;
}

double skl_loss(const EnsembleOutput& reference, const EnsembleOutput& candidate, const SklLoss& config) {
  require_same_shape(reference, candidate);
  const auto edges = reference_edges(reference, config);
  double sum = 0.0;
  double mean_term = 0.0;
  for (std::size_t s = 0; s < reference.seeds(); ++s) {
    for (std::size_t k = 0; k < reference.variables(); ++k) {
      const FixedEdges shared{edges[k]};
      const auto p = histogram_pdf(prepared_series(reference, s, k, config.mean_center), shared, config.bins,
                                   config.pseudo_count);
      const auto q = histogram_pdf(prepared_series(candidate, s, k, config.mean_center), shared, config.bins,
                                   config.pseudo_count);
      sum += 0.5 * skl_divergence(p, q);
      if (config.include_mean_term) {
        const auto r = reference.series(s, k);
        const double sd = series_norm(r, Normalization::Std);
        const double dm = (mean_of(candidate.series(s, k)) - mean_of(r)) / sd;
        mean_term += dm * dm;
      }
    }
  }
  const double sk = static_cast<double>(reference.seeds() * reference.variables());
  return (sum + mean_term) / (2.0 * sk);
}

double evaluate_loss(const LossKind& kind, const EnsembleOutput& reference, const EnsembleOutput& candidate) {
  if (const auto* skl = std::get_if<SklLoss>(&kind)) return skl_loss(reference, candidate, *skl);
  return time_series_loss(kind, reference, candidate);
}

double loss_between(const SimulationModel& model, const ParameterPoint& a, const ParameterPoint& b,
                    const SimulationConfig& config, const LossKind& kind) {
  const auto ref = run_ensemble(model, a, config);
  const auto cand = run_ensemble(model, b, config);
  return evaluate_loss(kind, ref, cand);
}

}  // namespace sloppy
