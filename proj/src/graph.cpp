#include "malss/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace malss {

Matrix gaussian_weights(const Matrix& x, double bandwidth, std::optional<int> knn) {
  if (!(bandwidth > 0.0)) {
    throw std::invalid_argument("gaussian_weights: bandwidth must be positive");
  }
  const Eigen::Index n = x.rows();
  Matrix w = Matrix::Zero(n, n);
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      const double v = std::exp(-d2 * inv_h2);
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  if (knn) {
    const int k = *knn;
    if (k < 1 || k >= n) {
      throw std::invalid_argument("gaussian_weights: knn must be in [1, N)");
    }
    // Keep each point's k strongest edges, then re-symmetrize by max so the
    // graph stays undirected.
    Matrix kept = Matrix::Zero(n, n);
    std::vector<Eigen::Index> order(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (w(i, a) != w(i, b)) return w(i, a) > w(i, b);
        return a < b;  // deterministic tie-break
      });
      int taken = 0;
      for (const Eigen::Index j : order) {
        if (j == i) continue;
        kept(i, j) = w(i, j);
        if (++taken == k) break;
      }
    }
    w = kept.cwiseMax(kept.transpose());
  }
  return w;
}

double median_bandwidth(const Matrix& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw std::invalid_argument("median_bandwidth: need at least 2 points");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dists.push_back((x.row(i) - x.row(j)).norm());
    }
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const double med = (m % 2 == 1) ? dists[m / 2]
                                  : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  if (!(med > 0.0)) {
    throw std::runtime_error("median_bandwidth: median pairwise distance is zero "
                             "(too many duplicate points)");
  }
  return med;
}

Matrix laplacian(const Matrix& weights) {
  if (weights.rows() != weights.cols()) {
    throw std::invalid_argument("laplacian: weight matrix must be square");
  }
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      if (weights(i, j) < 0.0) {
        throw std::invalid_argument("laplacian: negative weight entry");
      }
      if (weights(i, j) != weights(j, i)) {
        throw std::invalid_argument("laplacian: weight matrix must be symmetric");
      }
    }
  }
  Matrix l = -weights;
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    l(i, i) = weights.row(i).sum() - weights(i, i);
  }
  return l;
}

Matrix prior_matrix(const Matrix& x, const Matrix& delta) {
  if (delta.rows() != x.rows() || delta.cols() != x.rows()) {
    throw std::invalid_argument("prior_matrix: laplacian size must match point count");
  }
  return x.transpose() * delta * x;
}

GraphPrior build_graph_prior(const Matrix& x, std::optional<double> bandwidth,
                             std::optional<int> knn, double eta) {
  if (eta < 0.0) throw std::invalid_argument("build_graph_prior: eta must be >= 0");
  GraphPrior g;
  g.bandwidth = bandwidth ? *bandwidth : median_bandwidth(x);
  g.eta = eta;
  g.weights = gaussian_weights(x, g.bandwidth, knn);
  g.laplacian = laplacian(g.weights);
  g.prior_matrix = prior_matrix(x, g.laplacian);
  return g;
}

void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << (j ? "," : "") << format_g17(m(i, j));
    }
    out << "\n";
  }
}

}  // namespace malss
