#pragma once

#include "malss/util.hpp"

#include <functional>

namespace malss {

/// Objective callback: returns f(x) and fills grad (same size as x).
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct OptimConfig {
  int memory = 10;               // number of curvature pairs kept
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;  // on the 2-norm of the gradient
  double sufficient_decrease = 1e-4;  // line-search c1
  double curvature = 0.9;             // line-search c2 (strong condition)
  /// Optional per-accepted-step hook (iteration, point, objective value).
  std::function<void(int, const Vector&, double)> on_iterate;
};

enum class OptimStatus { kConverged, kMaxIterations, kLineSearchFailed };

struct OptimResult {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  OptimStatus status = OptimStatus::kConverged;
};

/// Limited-memory inverse-Hessian estimate: stores up to `memory` (s, y)
/// pairs and applies the two-loop recursion. Exposed separately so the
/// recursion can be tested against exact Newton directions.
class LbfgsHistory {
 public:
  explicit LbfgsHistory(int memory);

  /// Record a displacement/gradient-change pair. Pairs with non-positive
  /// curvature s'y are rejected (returns false) to keep the estimate
  /// positive definite.
  bool push(const Vector& s, const Vector& y);

  /// H * v with H the current inverse-Hessian estimate. The seed matrix is
  /// gamma * I with gamma = s'y / y'y of the newest pair (identity when
  /// empty).
  Vector apply(const Vector& v) const;

  void clear();
  int size() const { return static_cast<int>(s_.size()); }

 private:
  int memory_;
  std::vector<Vector> s_, y_;
  std::vector<double> rho_;
};

/// Maximize f via limited-memory BFGS with a strong-Wolfe line search.
/// Accepted steps increase f monotonically; the returned point is the best
/// iterate seen even when the line search fails.
OptimResult maximize(const Objective& f, const Vector& start,
                     const OptimConfig& config = {});

/// Central-difference gradient of a scalar function; the test harness's
/// independent check on analytic gradients.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                            const Vector& x, double step);

}  // namespace malss
