#include "malss/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace malss {

namespace {

bool rows_equal(const Matrix& x, int a, int b) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (x(a, j) != x(b, j)) return false;
  }
  return true;
}

int count_distinct_rows(const Matrix& x) {
  std::vector<int> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    }
    return false;
  });
  int distinct = x.rows() > 0 ? 1 : 0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (!rows_equal(x, order[i], order[i - 1])) ++distinct;
  }
  return distinct;
}

// Index of the nearest centroid; lowest index wins ties.
int nearest(const Matrix& centroids, const Eigen::RowVectorXd& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KmeansResult kmeans_once(const Matrix& x, int k, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  Rng rng(seed);
  Matrix centroids(k, x.cols());

  // Distance-weighted seeding.
  centroids.row(0) = x.row(static_cast<Eigen::Index>(rng.bounded(n)));
  Vector d2(n);
  for (int i = 0; i < n; ++i) {
    d2[i] = (x.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double r = rng.unit() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.bounded(n));
    }
    centroids.row(c) = x.row(pick);
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - centroids.row(c)).squaredNorm());
    }
  }

  KmeansResult res;
  res.assignments.assign(n, -1);
  for (int sweep = 0; sweep < 300; ++sweep) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int a = nearest(centroids, x.row(i));
      if (a != res.assignments[i]) {
        res.assignments[i] = a;
        changed = true;
      }
    }
    // Recompute means; re-seed any emptied cluster with the point farthest
    // from its current centroid.
    std::vector<int> counts(k, 0);
    Matrix sums = Matrix::Zero(k, x.cols());
    for (int i = 0; i < n; ++i) {
      ++counts[res.assignments[i]];
      sums.row(res.assignments[i]) += x.row(i);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / counts[c];
      } else {
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d =
              (x.row(i) - centroids.row(res.assignments[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centroids.row(c) = x.row(far_i);
        changed = true;
      }
    }
    if (!changed) break;
  }

  res.centroids = centroids;
  res.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    res.inertia += (x.row(i) - centroids.row(res.assignments[i])).squaredNorm();
  }
  return res;
}

}  // namespace

KmeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts) {
  if (x.rows() == 0) throw std::invalid_argument("kmeans: empty input");
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  const int distinct = count_distinct_rows(x);
  if (k > distinct) {
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds the " +
                                std::to_string(distinct) + " distinct rows");
  }
  KmeansResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    KmeansResult cur = kmeans_once(x, k, mix_seed(seed, static_cast<std::uint64_t>(r)));
    if (!have || cur.inertia < best.inertia) {
      best = std::move(cur);
      have = true;
    }
  }
  return best;
}

SimResult simulate_labelers(const Dataset& ds, const SimConfig& config) {
  ds.validate();
  if (!ds.ground_truth) {
    throw std::runtime_error("simulate_labelers: dataset has no ground truth");
  }
  if (config.num_labelers < 1) {
    throw std::invalid_argument("simulate_labelers: need at least one labeler");
  }
  if (config.error_rate < 0.0 || config.error_rate > 1.0) {
    throw std::invalid_argument("simulate_labelers: error_rate must be in [0, 1]");
  }
  const int n = ds.num_points();
  const int t_count = config.num_labelers;
  const auto& truth = *ds.ground_truth;

  const KmeansResult km =
      kmeans(ds.features, t_count, mix_seed(config.seed, 0xC1u), config.kmeans_restarts);

  SimResult res;
  res.assignments = km.assignments;
  res.labels = LabelMatrix(n, t_count);
  res.flips.assign(t_count, 0);
  res.off_cluster.assign(t_count, 0);
  for (int t = 0; t < t_count; ++t) {
    std::vector<int> off;
    for (int i = 0; i < n; ++i) {
      if (km.assignments[i] != t) off.push_back(i);
    }
    res.off_cluster[t] = static_cast<int>(off.size());
    const long flips = std::lround(config.error_rate * static_cast<double>(off.size()));
    Rng rng(mix_seed(config.seed, 0xF11b5u + static_cast<std::uint64_t>(t)));
    rng.shuffle(off);
    std::vector<char> flip(n, 0);
    for (long j = 0; j < flips; ++j) flip[off[static_cast<std::size_t>(j)]] = 1;
    res.flips[t] = static_cast<int>(flips);
    for (int i = 0; i < n; ++i) {
      res.labels.set(i, t, flip[i] ? 1 - truth[i] : truth[i]);
    }
  }
  return res;
}

}  // namespace malss
