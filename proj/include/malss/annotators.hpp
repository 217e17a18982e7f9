#pragma once

#include "malss/util.hpp"

namespace malss {

/// Lower clamp on annotator noise; keeps every label log-likelihood finite.
inline constexpr double kDefaultSigmaMin = 1e-3;

/// One annotator's noise model: sigma_t(x) = logistic(w'x + gamma), the
/// standard deviation of the Gaussian flip noise around the true label.
struct AnnotatorParams {
  Vector w;
  double gamma = 0.0;
};

/// Input-dependent noise level, clamped below at sigma_min.
double sigma(const AnnotatorParams& params, const Vector& x,
             double sigma_min = kDefaultSigmaMin);

/// log N(y; z, sigma^2) for a 0/1 label y against candidate truth z.
double label_loglik(int y, int z, double sigma);

/// Gradient of label_loglik(y, z, sigma(w'x + gamma)) in (w, gamma).
/// Zero in the clamped regime.
struct SigmaGradTerms {
  Vector dw;
  double dgamma = 0.0;
};
SigmaGradTerms sigma_grad_terms(const AnnotatorParams& params, const Vector& x,
                                int y, int z, double sigma_min = kDefaultSigmaMin);

/// Expected label log-likelihood under P(z=1) = p1 for activation
/// u = w'x + gamma, plus the scalar gradient factor d(value)/du. The factor
/// multiplies x for the w-gradient and 1 for the gamma-gradient, and is zero
/// in the clamped regime. Every noise-model computation funnels through
/// here so M-step, E-step and per-label gradients cannot drift apart.
struct NoiseTerm {
  double sigma = 0.0;
  double value = 0.0;
  double factor = 0.0;
};
NoiseTerm expected_label_term(double u, int y, double p1, double sigma_min);

}  // namespace malss
