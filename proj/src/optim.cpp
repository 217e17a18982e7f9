#include "malss/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace malss {

LbfgsHistory::LbfgsHistory(int memory) : memory_(memory) {
  if (memory < 1) throw std::invalid_argument("LbfgsHistory: memory must be >= 1");
}

bool LbfgsHistory::push(const Vector& s, const Vector& y) {
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm())) return false;
  if (static_cast<int>(s_.size()) == memory_) {
    s_.erase(s_.begin());
    y_.erase(y_.begin());
    rho_.erase(rho_.begin());
  }
  s_.push_back(s);
  y_.push_back(y);
  rho_.push_back(1.0 / sy);
  return true;
}

void LbfgsHistory::clear() {
  s_.clear();
  y_.clear();
  rho_.clear();
}

Vector LbfgsHistory::apply(const Vector& v) const {
  const int k = size();
  Vector q = v;
  std::vector<double> alpha(k);
  for (int i = k - 1; i >= 0; --i) {
    alpha[i] = rho_[i] * s_[i].dot(q);
    q -= alpha[i] * y_[i];
  }
  if (k > 0) {
    const double gamma = 1.0 / (rho_[k - 1] * y_[k - 1].squaredNorm());
    q *= gamma;
  }
  for (int i = 0; i < k; ++i) {
    const double beta = rho_[i] * y_[i].dot(q);
    q += (alpha[i] - beta) * s_[i];
  }
  return q;
}

namespace {

// Internally we minimize g = -f. One point's state during the search.
struct Eval {
  double value;   // g(x + a d)
  double slope;   // d/da g(x + a d)
};

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;
  Vector x;
  Vector grad;
};

// Minimizer of the cubic interpolant through (a0, f0, g0) and (a1, f1, g1);
// NaN when the interpolant has no interior minimizer.
double cubic_minimizer(double a0, double f0, double g0, double a1, double f1,
                       double g1) {
  const double d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1);
  const double disc = d1 * d1 - g0 * g1;
  if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), a1 - a0);
  return a1 - (a1 - a0) * (g1 + d2 - d1) / (g1 - g0 + 2.0 * d2);
}

class WolfeSearch {
 public:
  // fval/grad0 are the maximization objective's value and gradient at x0;
  // the search itself works on the minimization problem g = -f.
  WolfeSearch(const Objective& f, const Vector& x0, double fval, const Vector& grad0,
              const Vector& dir, double c1, double c2)
      : f_(f), x0_(x0), dir_(dir), phi0_(-fval), dphi0_(-grad0.dot(dir)), c1_(c1), c2_(c2) {}

  double initial_slope() const { return dphi0_; }

  // Strong-Wolfe search on phi(a) = g(x0 + a * dir) for the minimization
  // problem g = -f; standard bracket-then-zoom scheme.
  LineSearchResult run(double a_init) {
    LineSearchResult out;
    if (dphi0_ >= 0.0) return out;  // not a descent direction
    double a_prev = 0.0;
    Eval prev{phi0_, dphi0_};
    double a = a_init;
    const double a_max = 1e10;
    for (int it = 0; it < 60; ++it) {
      const Eval cur = eval(a);
      if (!std::isfinite(cur.value) || cur.value > phi0_ + c1_ * a * dphi0_ ||
          (it > 0 && cur.value >= prev.value)) {
        return zoom(a_prev, prev, a, cur);
      }
      if (std::abs(cur.slope) <= -c2_ * dphi0_) {
        return accept(a, cur);
      }
      if (cur.slope >= 0.0) {
        return zoom(a, cur, a_prev, prev);
      }
      a_prev = a;
      prev = cur;
      a = std::min(2.0 * a, a_max);
      if (a_prev >= a_max) break;
    }
    return out;
  }

 private:
  Eval eval(double a) {
    x_trial_ = x0_ + a * dir_;
    grad_trial_.resize(x0_.size());
    const double fval = f_(x_trial_, grad_trial_);
    // g = -f, so value/slope flip sign.
    return Eval{-fval, -grad_trial_.dot(dir_)};
  }

  LineSearchResult accept(double a, const Eval& e) {
    LineSearchResult out;
    out.ok = true;
    out.step = a;
    out.value = e.value;
    out.x = x_trial_;
    out.grad = grad_trial_;
    return out;
  }

  LineSearchResult zoom(double a_lo, Eval lo, double a_hi, Eval hi) {
    LineSearchResult out;
    Vector best_x, best_grad;  // track the lo end's evaluation
    for (int it = 0; it < 50; ++it) {
      double a = cubic_minimizer(a_lo, lo.value, lo.slope, a_hi, hi.value, hi.slope);
      const double left = std::min(a_lo, a_hi);
      const double right = std::max(a_lo, a_hi);
      const double width = right - left;
      if (!std::isfinite(a) || a <= left + 0.1 * width || a >= right - 0.1 * width) {
        a = 0.5 * (a_lo + a_hi);  // interpolant unusable; bisect
      }
      const Eval cur = eval(a);
      if (!std::isfinite(cur.value) || cur.value > phi0_ + c1_ * a * dphi0_ ||
          cur.value >= lo.value) {
        a_hi = a;
        hi = cur;
      } else {
        if (std::abs(cur.slope) <= -c2_ * dphi0_) {
          return accept(a, cur);
        }
        if (cur.slope * (a_hi - a_lo) >= 0.0) {
          a_hi = a_lo;
          hi = lo;
        }
        a_lo = a;
        lo = cur;
        best_x = x_trial_;
        best_grad = grad_trial_;
      }
      if (std::abs(a_hi - a_lo) <= 1e-14 * std::max(1.0, std::abs(a_lo))) break;
    }
    // Interval collapsed. Fall back to the lo end when it still makes
    // sufficient progress (it satisfies the decrease condition by
    // construction whenever it was produced by eval()).
    if (a_lo > 0.0 && best_x.size() > 0 && lo.value < phi0_) {
      out.ok = true;
      out.step = a_lo;
      out.value = lo.value;
      out.x = best_x;
      out.grad = best_grad;
    }
    return out;
  }

  const Objective& f_;
  const Vector& x0_;
  const Vector& dir_;
  double phi0_, dphi0_, c1_, c2_;
  Vector x_trial_, grad_trial_;
};

}  // namespace

OptimResult maximize(const Objective& f, const Vector& start,
                     const OptimConfig& config) {
  OptimResult res;
  Vector x = start;
  Vector grad(start.size());
  double fval = f(x, grad);
  if (!std::isfinite(fval)) {
    throw std::runtime_error("maximize: objective not finite at start");
  }
  res.x = x;
  res.value = fval;
  res.gradient_norm = grad.norm();
  if (res.gradient_norm <= config.gradient_tolerance) {
    res.status = OptimStatus::kConverged;
    return res;
  }

  LbfgsHistory history(config.memory);
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    // Ascent direction: H * grad for the maximization problem.
    Vector dir = history.apply(grad);
    if (dir.dot(grad) <= 0.0) {
      history.clear();
      dir = grad;
    }
    const double a_init =
        (history.size() == 0) ? 1.0 / std::max(1.0, grad.norm()) : 1.0;

    WolfeSearch search(f, x, fval, grad, dir, config.sufficient_decrease,
                       config.curvature);
    const LineSearchResult ls = search.run(a_init);
    if (!ls.ok) {
      res.status = OptimStatus::kLineSearchFailed;
      res.iterations = iter - 1;
      return res;
    }

    const Vector s = ls.x - x;
    const Vector y = ls.grad - grad;
    // Minimization curvature pairs: s stays, y flips with g = -f.
    history.push(s, -y);

    x = ls.x;
    grad = ls.grad;
    fval = -ls.value;
    res.x = x;
    res.value = fval;
    res.gradient_norm = grad.norm();
    res.iterations = iter;
    if (config.on_iterate) config.on_iterate(iter, x, fval);
    if (res.gradient_norm <= config.gradient_tolerance) {
      res.status = OptimStatus::kConverged;
      return res;
    }
  }
  res.status = OptimStatus::kMaxIterations;
  return res;
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f,
                            const Vector& x, double step) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double orig = x[j];
    xp[j] = orig + step;
    const double up = f(xp);
    xp[j] = orig - step;
    const double down = f(xp);
    xp[j] = orig;
    g[j] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace malss
