#include "malss/annotators.hpp"

#include <cmath>
#include <stdexcept>

namespace malss {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)
}

double sigma(const AnnotatorParams& params, const Vector& x, double sigma_min) {
  if (params.w.size() != x.size()) {
    throw std::invalid_argument("sigma: weight/feature dimension mismatch");
  }
  return std::max(logistic(params.w.dot(x) + params.gamma), sigma_min);
}

double label_loglik(int y, int z, double sigma) {
  const double r = static_cast<double>(y - z);
  return -std::log(sigma) - kHalfLog2Pi - r * r / (2.0 * sigma * sigma);
}

NoiseTerm expected_label_term(double u, int y, double p1, double sigma_min) {
  NoiseTerm t;
  const double s = logistic(u);
  const bool clamped = s < sigma_min;
  t.sigma = clamped ? sigma_min : s;
  // (y - z)^2 is 1 exactly when the annotator disagrees with z, so its
  // expectation is the posterior mass on the opposite label.
  const double e2 = y == 1 ? 1.0 - p1 : p1;
  t.value = -std::log(t.sigma) - kHalfLog2Pi - e2 / (2.0 * t.sigma * t.sigma);
  t.factor = clamped ? 0.0 : (e2 / (t.sigma * t.sigma) - 1.0) * (1.0 - t.sigma);
  return t;
}

SigmaGradTerms sigma_grad_terms(const AnnotatorParams& params, const Vector& x,
                                int y, int z, double sigma_min) {
  if (params.w.size() != x.size()) {
    throw std::invalid_argument("sigma_grad_terms: weight/feature dimension mismatch");
  }
  const double u = params.w.dot(x) + params.gamma;
  const NoiseTerm t = expected_label_term(u, y, z == 1 ? 1.0 : 0.0, sigma_min);
  SigmaGradTerms g;
  g.dw = t.factor * x;
  g.dgamma = t.factor;
  return g;
}

}  // namespace malss
