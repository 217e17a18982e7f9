#pragma once

#include "malss/dataset.hpp"

#include <cstdint>

namespace malss {

struct SimConfig {
  int num_labelers = 5;
  double error_rate = 0.35;  // fraction of each labeler's off-cluster points flipped
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
};

struct KmeansResult {
  std::vector<int> assignments;  // cluster index per point
  Matrix centroids;              // k x num_features
  double inertia = 0.0;          // sum of squared distances to own centroid
};

/// Lloyd's algorithm with distance-weighted seeding, several restarts, and
/// deterministic tie-breaking; the lowest-inertia restart wins (earliest on
/// ties). k must not exceed the number of distinct rows.
KmeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 10);

struct SimResult {
  LabelMatrix labels;            // every labeler labels every point
  std::vector<int> assignments;  // cluster per point (k = num_labelers)
  std::vector<int> flips;        // per labeler: number of flipped labels
  std::vector<int> off_cluster;  // per labeler: points outside its cluster
};

/// Cluster the points into num_labelers groups; labeler t reproduces ground
/// truth exactly on cluster t and flips a uniformly chosen set of exactly
/// round(error_rate * |off-cluster|) of the remaining points.
SimResult simulate_labelers(const Dataset& ds, const SimConfig& config);

}  // namespace malss
