#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sloppy/fisher.hpp"

namespace sloppy {

// Eigenpairs sorted by descending eigenvalue. Column i of `eigenvectors` is
// paired with eigenvalues[i] and has its largest-magnitude component positive.
struct Spectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  std::vector<std::string> names;

  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
  // lambda_i / lambda_1 (all zero when lambda_1 == 0).
  std::vector<double> ratios() const;
};

struct AxisSimilarityReport {
  std::vector<std::size_t> best_axis;
  std::vector<double> similarity;  // max_p |cos(v_i, e_p)|, in [1/sqrt(P), 1]
};

// Cyclic Jacobi eigensolver for a symmetric matrix. Throws NotSymmetric when
// |a_ij - a_ji| > 1e-12 * max |a|.
Spectrum eigendecompose(const Eigen::MatrixXd& matrix, std::vector<std::string> names = {});
Spectrum eigendecompose(const FisherMatrix& fisher);

// Flips v so its largest-magnitude component (first on ties) is positive.
void normalize_sign(Eigen::Ref<Eigen::VectorXd> v);

AxisSimilarityReport axis_similarity(const Spectrum& spectrum);

// 1 / sqrt(lambda): the log-space distance that changes the loss by a
// comparable amount along that eigendirection.
double stiffness_scale(double lambda);

// Eigenvalues of G G^T / M for P x M standard-normal G, pooled over trials
// (trial-major, descending within a trial).
std::vector<double> wishart_null(std::size_t p, std::size_t m, std::size_t trials, std::uint64_t seed);

// [(1 - sqrt(P/M))^2, (1 + sqrt(P/M))^2]
std::pair<double, double> marchenko_pastur_support(std::size_t p, std::size_t m);

}  // namespace sloppy
