#include "sloppy/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sloppy/error.hpp"

namespace sloppy {

std::vector<double> Spectrum::ratios() const {
  std::vector<double> r(size(), 0.0);
  if (size() == 0 || eigenvalues[0] == 0.0) return r;
  for (std::size_t i = 0; i < size(); ++i) r[i] = eigenvalues[static_cast<Eigen::Index>(i)] / eigenvalues[0];
  return r;
}

void normalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v.size() > 0 && v[best] < 0.0) v = -v;
}

namespace {

// One Jacobi rotation zeroing a(p, q).
void rotate(Eigen::MatrixXd& a, Eigen::MatrixXd& v, Eigen::Index p, Eigen::Index q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(k, q) = s * akp + c * akq;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const double apk = a(p, k);
    const double aqk = a(q, k);
    a(p, k) = c * apk - s * aqk;
    a(q, k) = s * apk + c * aqk;
  }
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

bool lexicographically_greater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return false;
}

}  // namespace

Spectrum eigendecompose(const Eigen::MatrixXd& matrix, std::vector<std::string> names) {
  if (matrix.rows() != matrix.cols()) throw Error(ErrorKind::NotSymmetric, "matrix is not square");
  const Eigen::Index n = matrix.rows();
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != n) {
    throw Error(ErrorKind::InvalidArgument, "names do not match matrix size");
  }
  const double scale = n > 0 ? matrix.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(matrix(i, j) - matrix(j, i)) > 1e-12 * scale) {
        throw Error(ErrorKind::NotSymmetric, "entries (" + std::to_string(i) + "," + std::to_string(j) + ") differ");
      }
    }
  }

  Eigen::MatrixXd a = 0.5 * (matrix + matrix.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double frob = a.norm();
  for (int sweep = 0; sweep < 100 && n > 1; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * frob || off == 0.0) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        // Skip entries already negligible relative to both diagonals.
        if (std::abs(a(p, q)) <= 1e-300 ||
            (sweep > 3 && std::abs(a(p, q)) < 1e-18 * (std::abs(a(p, p)) + std::abs(a(q, q))))) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        rotate(a, v, p, q);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd diag = a.diagonal();
  for (Eigen::Index i = 0; i < n; ++i) normalize_sign(v.col(i));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return diag[x] > diag[y]; });

  // Ties: order (numerically) degenerate eigenvalues by their sign-normalised
  // eigenvectors, lexicographically descending.
  const double tie_tol = 1e-12 * std::max(scale, 1e-300);
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && diag[order[end - 1]] - diag[order[end]] <= tie_tol) ++end;
    if (end - start > 1) {
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end), [&](Eigen::Index x, Eigen::Index y) {
                         return lexicographically_greater(v.col(x), v.col(y));
                       });
    }
    start = end;
  }

  Spectrum spec;
  spec.eigenvalues.resize(n);
  spec.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    spec.eigenvalues[i] = diag[order[static_cast<std::size_t>(i)]];
    spec.eigenvectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  if (names.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  }
  spec.names = std::move(names);
  return spec;
}

Spectrum eigendecompose(const FisherMatrix& fisher) { return eigendecompose(fisher.entries, fisher.names); }

AxisSimilarityReport axis_similarity(const Spectrum& spectrum) {
  AxisSimilarityReport report;
  const Eigen::Index n = static_cast<Eigen::Index>(spectrum.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto col = spectrum.eigenvectors.col(i);
    Eigen::Index best = 0;
    const double norm = col.norm();
    for (Eigen::Index p = 1; p < n; ++p) {
      if (std::abs(col[p]) > std::abs(col[best])) best = p;
    }
    report.best_axis.push_back(static_cast<std::size_t>(best));
    report.similarity.push_back(norm > 0.0 ? std::abs(col[best]) / norm : 0.0);
  }
  return report;
}

double stiffness_scale(double lambda) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::NonPositiveEigenvalue, "lambda = " + std::to_string(lambda));
  return 1.0 / std::sqrt(lambda);
}

std::vector<double> wishart_null(std::size_t p, std::size_t m, std::size_t trials, std::uint64_t seed) {
  if (p < 1 || m < p) throw Error(ErrorKind::InvalidArgument, "wishart null needs M >= P >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> pooled;
  pooled.reserve(p * trials);
  const auto rows = static_cast<Eigen::Index>(p);
  const auto cols = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd g(rows, cols);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    // Fill row-major so the draw order does not depend on Eigen's storage.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = z(rng);
    }
    const Eigen::MatrixXd w = (g * g.transpose()) / static_cast<double>(m);
    // Round-off can leave g g^T asymmetric in the last bit.
    const Eigen::MatrixXd sym = 0.5 * (w + w.transpose());
    const auto spec = eigendecompose(sym);
    for (Eigen::Index i = 0; i < rows; ++i) pooled.push_back(spec.eigenvalues[i]);
  }
  return pooled;
}

std::pair<double, double> marchenko_pastur_support(std::size_t p, std::size_t m) {
  const double r = std::sqrt(static_cast<double>(p) / static_cast<double>(m));
  return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

}  // namespace sloppy
