#include "malss/annotators.hpp"

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "malss/optim.hpp"

using namespace malss;

TEST_CASE("sigma is the logistic of the activation, clamped below") {
  AnnotatorParams a;
  a.w = Vector::Zero(2);
  a.gamma = 0.0;
  Vector x(2);
  x << 1.0, -1.0;
  CHECK(sigma(a, x) == doctest::Approx(0.5).epsilon(1e-15));

  a.w << 2.0, 0.5;
  a.gamma = -0.25;  // u = 2 - 0.5 - 0.25 = 1.25
  CHECK(sigma(a, x) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-1.25))).epsilon(1e-15));

  a.w << -50.0, 0.0;  // deep negative activation -> clamp
  a.gamma = 0.0;
  CHECK(sigma(a, x) == kDefaultSigmaMin);
  CHECK(sigma(a, x, 0.05) == 0.05);
}

TEST_CASE("label_loglik is the Gaussian log-density at the residual") {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::acos(-1.0));
  for (double s : {0.1, 0.5, 0.9}) {
    for (int y : {0, 1}) {
      for (int z : {0, 1}) {
        const double r = y - z;
        const double expect = -std::log(s) - half_log_2pi - r * r / (2 * s * s);
        CHECK(label_loglik(y, z, s) == doctest::Approx(expect).epsilon(1e-15));
      }
    }
  }
  // correct label beats wrong label at any noise level below 1
  CHECK(label_loglik(1, 1, 0.3) > label_loglik(0, 1, 0.3));
}

TEST_CASE("expected_label_term averages the two candidate truths") {
  Rng rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const double u = 4.0 * rng.normal();
    const int y = static_cast<int>(rng.bounded(2));
    const double p1 = rng.unit();
    const NoiseTerm term = expected_label_term(u, y, p1, kDefaultSigmaMin);

    const double s = std::max(1.0 / (1.0 + std::exp(-u)), kDefaultSigmaMin);
    CHECK(term.sigma == doctest::Approx(s).epsilon(1e-14));
    const double expect =
        p1 * label_loglik(y, 1, s) + (1.0 - p1) * label_loglik(y, 0, s);
    CHECK(term.value == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("expected_label_term factor matches finite differences in u") {
  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const double u = 3.0 * rng.normal();
    const int y = static_cast<int>(rng.bounded(2));
    const double p1 = 0.05 + 0.9 * rng.unit();

    Vector u_vec(1);
    u_vec << u;
    const Vector fd = finite_diff_gradient(
        [&](const Vector& v) {
          return expected_label_term(v[0], y, p1, kDefaultSigmaMin).value;
        },
        u_vec, 1e-6);
    const NoiseTerm term = expected_label_term(u, y, p1, kDefaultSigmaMin);
    CHECK(malss::testing::rel_err(term.factor, fd[0]) < 1e-7);
  }
}

TEST_CASE("clamped regime contributes zero gradient") {
  const NoiseTerm term = expected_label_term(-40.0, 1, 0.7, kDefaultSigmaMin);
  CHECK(term.sigma == kDefaultSigmaMin);
  CHECK(term.factor == 0.0);

  AnnotatorParams a;
  a.w = Vector::Constant(2, -30.0);
  a.gamma = 0.0;
  Vector x(2);
  x << 1.0, 1.0;
  const SigmaGradTerms g = sigma_grad_terms(a, x, 1, 0);
  CHECK(g.dw.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.dgamma == 0.0);
}

TEST_CASE("sigma_grad_terms matches finite differences of label_loglik") {
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = 1 + static_cast<int>(rng.bounded(4));
    AnnotatorParams a;
    a.w.resize(d);
    for (int j = 0; j < d; ++j) a.w[j] = 0.8 * rng.normal();
    a.gamma = 0.8 * rng.normal();
    Vector x(d);
    for (int j = 0; j < d; ++j) x[j] = rng.normal();
    const int y = static_cast<int>(rng.bounded(2));
    const int z = static_cast<int>(rng.bounded(2));

    Vector theta(d + 1);
    theta.head(d) = a.w;
    theta[d] = a.gamma;
    const Vector fd = finite_diff_gradient(
        [&](const Vector& v) {
          AnnotatorParams p{v.head(d), v[d]};
          return label_loglik(y, z, sigma(p, x));
        },
        theta, 1e-6);

    const SigmaGradTerms g = sigma_grad_terms(a, x, y, z);
    for (int j = 0; j < d; ++j) {
      CHECK(malss::testing::rel_err(g.dw[j], fd[j]) < 1e-6);
    }
    CHECK(malss::testing::rel_err(g.dgamma, fd[d]) < 1e-6);
  }
}

TEST_CASE("noisier annotators are less informative about the truth") {
  // The likelihood ratio in favor of the observed label shrinks as sigma
  // grows: with sigma near 1 a label carries almost no information.
  const double sharp = label_loglik(1, 1, 0.2) - label_loglik(1, 0, 0.2);
  const double vague = label_loglik(1, 1, 0.9) - label_loglik(1, 0, 0.9);
  CHECK(sharp > vague);
  CHECK(vague > 0.0);
}
