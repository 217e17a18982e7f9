#pragma once

// Shared test utilities: temp files, random problem instances, and the
// independent oracles (joint enumeration, finite differences) that the unit
// and acceptance suites check the library against.

#include "malss/eval.hpp"
#include "malss/optim.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace malss::testing {

/// Self-cleaning unique temp directory.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    const auto base = std::filesystem::temp_directory_path();
    do {
      path_ = base / ("malss_test_" + std::to_string(++counter) + "_" +
                      std::to_string(static_cast<unsigned long>(::getpid())));
    } while (std::filesystem::exists(path_));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

/// One random model-fitting problem with nontrivial parameters.
struct Instance {
  Matrix x;
  LabelMatrix labels;
  std::vector<AnnotatorParams> annotators;
  Vector weights;
  double bias = 0.0;
};

/// Random instance: features ~ N(0,1), each (point, annotator) labeled with
/// probability `density`, parameters ~ 0.5 * N(0,1).
inline Instance random_instance(Rng& rng, int n, int d, int t, double density) {
  Instance inst;
  inst.x.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) inst.x(i, j) = rng.normal();
  }
  inst.labels = LabelMatrix(n, t);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < t; ++k) {
      if (rng.unit() < density) {
        inst.labels.set(i, k, static_cast<int>(rng.bounded(2)));
      }
    }
  }
  for (int k = 0; k < t; ++k) {
    AnnotatorParams a;
    a.w.resize(d);
    for (int j = 0; j < d; ++j) a.w[j] = 0.5 * rng.normal();
    a.gamma = 0.5 * rng.normal();
    inst.annotators.push_back(std::move(a));
  }
  inst.weights.resize(d);
  for (int j = 0; j < d; ++j) inst.weights[j] = 0.5 * rng.normal();
  inst.bias = 0.5 * rng.normal();
  return inst;
}

/// Joint enumeration over z in {0,1}^N. Densities written out directly so
/// the oracle shares no likelihood code with the library.
struct EnumerationResult {
  Vector p1;
  double loglik = 0.0;
};

inline EnumerationResult enumerate_joint(const Matrix& x, const LabelMatrix& labels,
                                         const Vector& weights, double bias,
                                         const std::vector<AnnotatorParams>& ann,
                                         double sigma_min) {
  const int n = static_cast<int>(x.rows());
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  std::vector<double> joint(static_cast<std::size_t>(1) << n);
  for (std::size_t mask = 0; mask < joint.size(); ++mask) {
    double lp = 0.0;
    for (int i = 0; i < n; ++i) {
      const int zi = (mask >> i) & 1;
      const double u = weights.dot(x.row(i)) + bias;
      const double prior1 = 1.0 / (1.0 + std::exp(-u));
      lp += std::log(zi ? prior1 : 1.0 - prior1);
      for (const Observation& o : labels.labels_of(i)) {
        const AnnotatorParams& a = ann[o.annotator];
        const double ua = a.w.dot(x.row(i)) + a.gamma;
        double s = 1.0 / (1.0 + std::exp(-ua));
        if (s < sigma_min) s = sigma_min;
        const double r = o.label - zi;
        lp += -std::log(s) - half_log_2pi - r * r / (2.0 * s * s);
      }
    }
    joint[mask] = lp;
  }
  double hi = joint[0];
  for (const double v : joint) hi = std::max(hi, v);
  double total = 0.0;
  std::vector<double> per_bit(n, 0.0);
  for (std::size_t mask = 0; mask < joint.size(); ++mask) {
    const double w = std::exp(joint[mask] - hi);
    total += w;
    for (int i = 0; i < n; ++i) {
      if ((mask >> i) & 1) per_bit[i] += w;
    }
  }
  EnumerationResult res;
  res.loglik = hi + std::log(total);
  res.p1.resize(n);
  for (int i = 0; i < n; ++i) res.p1[i] = per_bit[i] / total;
  return res;
}

/// Relative error suited to gradient comparisons: absolute below 1, relative
/// above.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Max relative error between an analytic M-step gradient and central finite
/// differences of the same objective over the packed parameter vector.
/// `kind` selects the family; graph may be null for kId/kMlOriginal.
inline double mstep_fd_max_rel_err(ModelKind kind, const Instance& inst,
                                   const GraphPrior* graph, const Posterior& post,
                                   double sigma_min, double ridge, double step) {
  const int d = static_cast<int>(inst.x.cols());
  const int t = static_cast<int>(inst.annotators.size());
  const int dim = d + 1 + t * (d + 1);

  auto unpack = [&](const Vector& theta, Vector& w, double& b,
                    std::vector<AnnotatorParams>& ann) {
    w = theta.head(d);
    b = theta[d];
    ann.assign(t, AnnotatorParams{Vector::Zero(d), 0.0});
    int off = d + 1;
    for (int k = 0; k < t; ++k) {
      ann[k].w = theta.segment(off, d);
      off += d;
      ann[k].gamma = theta[off++];
    }
  };
  auto value_at = [&](const Vector& theta) {
    Vector w;
    double b;
    std::vector<AnnotatorParams> ann;
    unpack(theta, w, b, ann);
    if (kind == ModelKind::kLgp) {
      return m_step_objective_lgp(LgpParams{w, b}, ann, inst.x, inst.labels,
                                  *graph, post, nullptr, sigma_min, ridge);
    }
    return m_step_objective_id(IdParams{w, b}, ann, inst.x, inst.labels, post,
                               nullptr, sigma_min, ridge);
  };

  Vector theta(dim);
  theta.head(d) = inst.weights;
  theta[d] = inst.bias;
  int off = d + 1;
  for (int k = 0; k < t; ++k) {
    theta.segment(off, d) = inst.annotators[k].w;
    off += d;
    theta[off++] = inst.annotators[k].gamma;
  }

  MStepGradients grads;
  if (kind == ModelKind::kLgp) {
    m_step_objective_lgp(LgpParams{inst.weights, inst.bias}, inst.annotators,
                         inst.x, inst.labels, *graph, post, &grads, sigma_min,
                         ridge);
  } else {
    m_step_objective_id(IdParams{inst.weights, inst.bias}, inst.annotators,
                        inst.x, inst.labels, post, &grads, sigma_min, ridge);
  }
  Vector analytic(dim);
  analytic.head(d) = grads.classifier;
  analytic[d] = grads.bias;
  off = d + 1;
  for (int k = 0; k < t; ++k) {
    analytic.segment(off, d) = grads.w[k];
    off += d;
    analytic[off++] = grads.gamma[k];
  }

  const Vector fd = finite_diff_gradient(value_at, theta, step);
  double worst = 0.0;
  for (int j = 0; j < dim; ++j) {
    worst = std::max(worst, rel_err(analytic[j], fd[j]));
  }
  return worst;
}

/// Random posterior vector in (0,1).
inline Posterior random_posterior(Rng& rng, int n) {
  Posterior post;
  post.p1.resize(n);
  for (int i = 0; i < n; ++i) post.p1[i] = 0.05 + 0.9 * rng.unit();
  return post;
}

/// Quadratic-time rank-sum AUC with half credit for ties; the independent
/// oracle for the trapezoid implementation.
inline double rank_sum_auc(const Vector& scores, const std::vector<int>& truth) {
  double wins = 0.0;
  long pos = 0, neg = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++pos;
      for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j] == 0) {
          if (scores[i] > scores[j]) wins += 1.0;
          else if (scores[i] == scores[j]) wins += 0.5;
        }
      }
    } else {
      ++neg;
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace malss::testing
