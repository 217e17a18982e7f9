#pragma once

#include "malss/util.hpp"

#include <optional>

namespace malss {

/// Similarity graph over training points plus the quadratic form it induces
/// on classifier weights.
struct GraphPrior {
  Matrix weights;       // symmetric, zero diagonal
  Matrix laplacian;     // degree - weights
  Matrix prior_matrix;  // X' laplacian X, positive semi-definite
  double bandwidth = 0.0;
  double eta = 1.0;     // strength of the weight-smoothness penalty
  double lambda = 1.0;  // scale of the direct label-level smoothness prior;
                        // kept for that model variant, unused here
};

/// Gaussian affinities w_ij = exp(-||x_i - x_j||^2 / h^2), zero diagonal.
/// With knn set, entries outside either point's k nearest neighbours are
/// zeroed and the result re-symmetrized by max.
Matrix gaussian_weights(const Matrix& x, double bandwidth,
                        std::optional<int> knn = std::nullopt);

/// Median of the strictly-upper-triangle pairwise Euclidean distances; the
/// default bandwidth. Requires at least two points and a positive result.
double median_bandwidth(const Matrix& x);

/// Unnormalized graph Laplacian diag(row sums) - weights. The input must be
/// square, symmetric and nonnegative.
Matrix laplacian(const Matrix& weights);

/// X' delta X for the weight-smoothness quadratic form.
Matrix prior_matrix(const Matrix& x, const Matrix& delta);

/// Convenience assembly; bandwidth defaults to the median heuristic.
GraphPrior build_graph_prior(const Matrix& x,
                             std::optional<double> bandwidth = std::nullopt,
                             std::optional<int> knn = std::nullopt,
                             double eta = 1.0);

/// Debug dump of a matrix as plain CSV.
void save_matrix_csv(const Matrix& m, const std::string& path);

}  // namespace malss
