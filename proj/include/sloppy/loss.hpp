#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sloppy/model.hpp"

namespace sloppy {

// Per-(s,k) scale applied to differences: mean, max |y|, population sd, or 1.
enum class Normalization { Mean, Max, Std, Unit };

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& name);
// Throws ZeroNormalization when the scale is exactly zero.
double series_norm(std::span<const double> series, Normalization n);

struct MseLoss {
  Normalization normalization = Normalization::Mean;
};
struct MspeLoss {};
struct LogCoshLoss {};
struct LogAbsLoss {
  Normalization normalization = Normalization::Mean;
};
struct SklLoss {
  std::size_t bins = 64;
  double pseudo_count = 0.5;
  bool mean_center = false;
  // Experimental, off by default: adds (1/2SK) sum ((mean_c - mean_r) / sd_r)^2.
  bool include_mean_term = false;
};

using LossKind = std::variant<MseLoss, MspeLoss, LogCoshLoss, LogAbsLoss, SklLoss>;

nlohmann::ordered_json loss_to_json(const LossKind& kind);
// Throws ConfigError with a field path rooted at `path`.
LossKind loss_from_json(const nlohmann::ordered_json& j, const std::string& path = "loss");
std::string loss_name(const LossKind& kind);

// --- histograms -------------------------------------------------------------

struct HistogramPdf {
  std::vector<double> edges;  // B + 1, strictly ascending
  std::vector<double> mass;   // B, strictly positive, sums to 1
};

struct FixedEdges {
  std::vector<double> edges;
};
// B equal-width bins over [min, max] of the samples, widened by 10% of the
// range on each side. A zero range is widened to +-max(0.5 |x|, 0.5).
struct AutoEdges {};
using EdgesPolicy = std::variant<FixedEdges, AutoEdges>;

std::vector<double> auto_edges(std::span<const double> samples, std::size_t bins);

// mass_b = (count_b + eta) / (n + B eta). Samples outside the edges are
// counted in the nearest end bin. Bins are [e_b, e_{b+1}).
HistogramPdf histogram_pdf(std::span<const double> samples, const EdgesPolicy& policy, std::size_t bins,
                           double pseudo_count);

double kl_divergence(const HistogramPdf& p, const HistogramPdf& q);
// kl(p, q) + kl(q, p)
double skl_divergence(const HistogramPdf& p, const HistogramPdf& q);

// --- ensemble losses --------------------------------------------------------

// L(reference, candidate) for the mse/mspe/logcosh/logabs kinds.
double time_series_loss(const LossKind& kind, const EnsembleOutput& reference, const EnsembleOutput& candidate);

// Histogram edges per variable, shared by every ensemble compared against
// this reference: auto_edges over the pooled (optionally mean-centred)
// reference samples of that variable.
std::vector<std::vector<double>> reference_edges(const EnsembleOutput& reference, const SklLoss& config);

// Series of (s, k), mean-centred when requested.
std::vector<double> prepared_series(const EnsembleOutput& ensemble, std::size_t s, std::size_t k, bool mean_center);

// (1/2SK) sum_{s,k} J(P_sk, Q_sk) with J = (kl(P,Q) + kl(Q,P)) / 2, so that
// the Hessian at the reference is (1/2SK) sum_{s,k} of the Fisher kernel.
double skl_loss(const EnsembleOutput& reference, const EnsembleOutput& candidate, const SklLoss& config);

// Dispatches on the kind.
double evaluate_loss(const LossKind& kind, const EnsembleOutput& reference, const EnsembleOutput& candidate);

// Runs both points on the same seed list and returns L(A as reference, B).
double loss_between(const SimulationModel& model, const ParameterPoint& a, const ParameterPoint& b,
                    const SimulationConfig& config, const LossKind& kind);

}  // namespace sloppy
