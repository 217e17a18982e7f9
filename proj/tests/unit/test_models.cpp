#include "malss/models.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "malss/sim.hpp"

using namespace malss;
using malss::testing::Instance;
using malss::testing::TempDir;
using malss::testing::enumerate_joint;
using malss::testing::mstep_fd_max_rel_err;
using malss::testing::random_instance;
using malss::testing::random_posterior;
using malss::testing::rel_err;

namespace {

// Two well-separated Gaussian blobs with blob index as the true label.
Dataset two_blobs(Rng& rng, int per_blob, double separation) {
  Dataset ds;
  ds.features.resize(2 * per_blob, 2);
  std::vector<int> gt(2 * per_blob);
  for (int i = 0; i < 2 * per_blob; ++i) {
    const int blob = i < per_blob ? 0 : 1;
    const double cx = blob == 0 ? -separation : separation;
    ds.features(i, 0) = cx + 0.6 * rng.normal();
    ds.features(i, 1) = 0.6 * rng.normal();
    gt[i] = blob;
  }
  ds.ground_truth = gt;
  return ds;
}

// Labels from noisy annotators flipping each ground-truth label i.i.d.
LabelMatrix noisy_labels(Rng& rng, const std::vector<int>& gt, int t,
                         double flip_rate) {
  LabelMatrix labels(static_cast<int>(gt.size()), t);
  for (int i = 0; i < static_cast<int>(gt.size()); ++i) {
    for (int a = 0; a < t; ++a) {
      const bool flip = rng.unit() < flip_rate;
      labels.set(i, a, flip ? 1 - gt[i] : gt[i]);
    }
  }
  return labels;
}

}  // namespace

TEST_CASE("posteriors and observed log-likelihood match joint enumeration") {
  Rng rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 2 + static_cast<int>(rng.bounded(7));
    const int d = 1 + static_cast<int>(rng.bounded(3));
    const int t = 1 + static_cast<int>(rng.bounded(3));
    const Instance inst = random_instance(rng, n, d, t, 0.7);

    const auto oracle = enumerate_joint(inst.x, inst.labels, inst.weights,
                                        inst.bias, inst.annotators,
                                        kDefaultSigmaMin);
    const Posterior post = e_step(inst.weights, inst.bias, inst.annotators,
                                  inst.x, inst.labels);
    REQUIRE(post.p1.size() == n);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(post.p1[i] - oracle.p1[i]) < 1e-12);
    }

    // the enumerated joint includes the classifier prior for every point;
    // the observed log-likelihood skips unlabeled points, whose prior factor
    // marginalizes to exactly 1, so the two agree whenever every point is
    // labeled and differ by nothing else
    const double got = observed_loglik(ModelKind::kId, inst.weights, inst.bias,
                                       inst.annotators, inst.x, inst.labels);
    CHECK(std::abs(got - oracle.loglik) < 1e-12 * std::max(1.0, std::abs(oracle.loglik)));
  }
}

TEST_CASE("graph-prior observed log-likelihood adds the weight penalty") {
  Rng rng(102);
  const Instance inst = random_instance(rng, 8, 2, 2, 0.8);
  const GraphPrior graph = build_graph_prior(inst.x);

  const auto oracle = enumerate_joint(inst.x, inst.labels, inst.weights,
                                      inst.bias, inst.annotators,
                                      kDefaultSigmaMin);
  const double penalty =
      graph.eta * inst.weights.dot(graph.prior_matrix * inst.weights);
  const double got =
      observed_loglik(ModelKind::kLgp, inst.weights, inst.bias,
                      inst.annotators, inst.x, inst.labels, &graph);
  CHECK(std::abs(got - (oracle.loglik - penalty)) < 1e-12);

  // the graph matters: the penalty is strictly positive here
  CHECK(penalty > 0.0);
  CHECK_THROWS_AS(observed_loglik(ModelKind::kLgp, inst.weights, inst.bias,
                                  inst.annotators, inst.x, inst.labels),
                  std::invalid_argument);
}

TEST_CASE("family-named E-steps agree with the generic one") {
  Rng rng(103);
  const Instance inst = random_instance(rng, 6, 2, 2, 0.7);
  const Posterior generic = e_step(inst.weights, inst.bias, inst.annotators,
                                   inst.x, inst.labels);
  const Posterior id = e_step_id(IdParams{inst.weights, inst.bias},
                                 inst.annotators, inst.x, inst.labels);
  const Posterior lgp = e_step_lgp(LgpParams{inst.weights, inst.bias},
                                   inst.annotators, inst.x, inst.labels);
  for (int i = 0; i < 6; ++i) {
    CHECK(id.p1[i] == generic.p1[i]);
    CHECK(lgp.p1[i] == generic.p1[i]);
  }
}

TEST_CASE("two agreeing coin-flip annotators push a neutral prior to 0.9820") {
  // sigma = 0.5 for both annotators, both say 1, classifier is neutral:
  // posterior odds are exp(2 * (1/(2*0.25))) = e^4.
  Matrix x(1, 1);
  x << 0.0;
  LabelMatrix labels(1, 2);
  labels.set(0, 0, 1);
  labels.set(0, 1, 1);
  std::vector<AnnotatorParams> ann(2, AnnotatorParams{Vector::Zero(1), 0.0});

  const Posterior post = e_step(Vector::Zero(1), 0.0, ann, x, labels);
  CHECK(post.p1[0] == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))).epsilon(1e-12));
  CHECK(post.p1[0] == doctest::Approx(0.9820).epsilon(1e-4));
}

TEST_CASE("unlabeled points fall back to the classifier prior") {
  Rng rng(104);
  const int n = 5, d = 3;
  Instance inst = random_instance(rng, n, d, 2, 0.0);  // density 0: no labels
  const Posterior post = e_step(inst.weights, inst.bias, inst.annotators,
                                inst.x, inst.labels);
  for (int i = 0; i < n; ++i) {
    const double u = inst.weights.dot(inst.x.row(i)) + inst.bias;
    CHECK(post.p1[i] == doctest::Approx(logistic(u)).epsilon(1e-15));
  }
}

TEST_CASE("M-step gradients match finite differences") {
  Rng rng(105);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 10 + static_cast<int>(rng.bounded(15));
    const int d = 1 + static_cast<int>(rng.bounded(4));
    const int t = 1 + static_cast<int>(rng.bounded(3));
    const Instance inst = random_instance(rng, n, d, t, 0.6);
    const Posterior post = random_posterior(rng, n);
    const GraphPrior graph = build_graph_prior(inst.x);
    const double ridge = rep % 2 == 0 ? 0.0 : 0.05;

    CHECK(mstep_fd_max_rel_err(ModelKind::kId, inst, nullptr, post,
                               kDefaultSigmaMin, ridge, 1e-5) < 1e-5);
    CHECK(mstep_fd_max_rel_err(ModelKind::kLgp, inst, &graph, post,
                               kDefaultSigmaMin, ridge, 1e-5) < 1e-5);
  }
}

TEST_CASE("M-step objective ignores unlabeled points") {
  Rng rng(106);
  const Instance inst = random_instance(rng, 8, 2, 2, 0.9);
  const Posterior post = random_posterior(rng, 8);

  // append three unlabeled rows
  Matrix x2(11, 2);
  x2.topRows(8) = inst.x;
  for (int i = 8; i < 11; ++i) {
    x2(i, 0) = rng.normal();
    x2(i, 1) = rng.normal();
  }
  LabelMatrix labels2(11, 2);
  for (int i = 0; i < 8; ++i) {
    for (const Observation& o : inst.labels.labels_of(i)) {
      labels2.set(i, o.annotator, o.label);
    }
  }
  Posterior post2;
  post2.p1.resize(11);
  post2.p1.head(8) = post.p1;
  post2.p1.tail(3).setConstant(0.5);

  const IdParams params{inst.weights, inst.bias};
  MStepGradients g1, g2;
  const double v1 = m_step_objective_id(params, inst.annotators, inst.x,
                                        inst.labels, post, &g1);
  const double v2 = m_step_objective_id(params, inst.annotators, x2, labels2,
                                        post2, &g2);
  CHECK(v1 == v2);
  CHECK((g1.classifier - g2.classifier).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g1.bias == g2.bias);
  for (int k = 0; k < 2; ++k) {
    CHECK((g1.w[k] - g2.w[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g1.gamma[k] == g2.gamma[k]);
  }
}

TEST_CASE("EM fit separates blobs and never decreases the objective") {
  Rng rng(107);
  const Dataset ds = two_blobs(rng, 30, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 3, 0.2);
  auto [scaled, scaling] = standardize(ds);

  for (ModelKind kind : {ModelKind::kId, ModelKind::kLgp, ModelKind::kMlOriginal}) {
    CAPTURE(to_string(kind));
    GraphPrior graph;
    const GraphPrior* graph_ptr = nullptr;
    if (kind == ModelKind::kLgp) {
      // mild penalty: the quadratic form grows with N^2, so eta = 1 on 60
      // points swamps the data term; this test exercises the learning path
      graph = build_graph_prior(scaled.features, std::nullopt, std::nullopt, 1e-3);
      graph_ptr = &graph;
    }
    const TrainedModel model =
        fit(kind, scaled.features, labels, graph_ptr, {}, &scaling);

    REQUIRE(model.diagnostics.objective_history.size() ==
            static_cast<std::size_t>(model.diagnostics.iterations));
    for (std::size_t i = 1; i < model.diagnostics.objective_history.size(); ++i) {
      CHECK(model.diagnostics.objective_history[i] >=
            model.diagnostics.objective_history[i - 1] - 1e-8);
    }
    CHECK(model.diagnostics.final_objective ==
          model.diagnostics.objective_history.back());
    CHECK(model.diagnostics.converged);

    // posterior should recover the blob structure well beyond the ~80%
    // a single annotator achieves
    int correct = 0;
    for (int i = 0; i < ds.num_points(); ++i) {
      const int pred = model.posterior.p1[i] >= 0.5 ? 1 : 0;
      correct += pred == (*ds.ground_truth)[i] ? 1 : 0;
    }
    CHECK(correct >= 54);  // at least 90% of 60
  }
}

TEST_CASE("a stronger graph penalty shrinks the classifier weights") {
  Rng rng(113);
  const Dataset ds = two_blobs(rng, 25, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 3, 0.2);
  auto [scaled, scaling] = standardize(ds);

  double prev_norm = std::numeric_limits<double>::infinity();
  for (double eta : {1e-4, 1e-2, 1.0}) {
    const GraphPrior graph =
        build_graph_prior(scaled.features, std::nullopt, std::nullopt, eta);
    const TrainedModel model =
        fit(ModelKind::kLgp, scaled.features, labels, &graph, {}, &scaling);
    const double norm = model.weights.norm();
    CHECK(norm < prev_norm);
    prev_norm = norm;
  }
}

TEST_CASE("frozen-noise variant keeps annotator slopes at zero") {
  Rng rng(108);
  const Dataset ds = two_blobs(rng, 20, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 2, 0.25);
  auto [scaled, scaling] = standardize(ds);

  const TrainedModel model =
      fit(ModelKind::kMlOriginal, scaled.features, labels, nullptr, {}, &scaling);
  bool gamma_moved = false;
  for (const AnnotatorParams& a : model.annotators) {
    CHECK(a.w.cwiseAbs().maxCoeff() == 0.0);
    gamma_moved |= a.gamma != 0.0;
  }
  CHECK(gamma_moved);

  // the full model on the same data is allowed to move the slopes
  const TrainedModel full =
      fit(ModelKind::kId, scaled.features, labels, nullptr, {}, &scaling);
  double slope_norm = 0.0;
  for (const AnnotatorParams& a : full.annotators) slope_norm += a.w.norm();
  CHECK(slope_norm > 0.0);
}

TEST_CASE("unlabeled rows leave the instance-difficulty fit untouched") {
  Rng rng(109);
  const Dataset ds = two_blobs(rng, 15, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 2, 0.2);

  // strip labels from the last 10 points
  LabelMatrix partial(30, 2);
  for (int i = 0; i < 20; ++i) {
    for (const Observation& o : labels.labels_of(i)) {
      partial.set(i, o.annotator, o.label);
    }
  }
  // same labeled points, without the 10 unlabeled rows
  Matrix x_small = ds.features.topRows(20);
  LabelMatrix labels_small(20, 2);
  for (int i = 0; i < 20; ++i) {
    for (const Observation& o : partial.labels_of(i)) {
      labels_small.set(i, o.annotator, o.label);
    }
  }

  const TrainedModel with_extra = fit(ModelKind::kId, ds.features, partial);
  const TrainedModel without = fit(ModelKind::kId, x_small, labels_small);
  CHECK((with_extra.weights - without.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(with_extra.bias == without.bias);
  for (int k = 0; k < 2; ++k) {
    CHECK((with_extra.annotators[k].w - without.annotators[k].w)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(with_extra.annotators[k].gamma == without.annotators[k].gamma);
  }

  // the graph-prior fit does respond: its graph covers the unlabeled rows
  const GraphPrior g_small = build_graph_prior(x_small);
  const GraphPrior g_full = build_graph_prior(ds.features);
  const TrainedModel lgp_small =
      fit(ModelKind::kLgp, x_small, labels_small, &g_small);
  const TrainedModel lgp_full = fit(ModelKind::kLgp, ds.features, partial, &g_full);
  CHECK((lgp_small.weights - lgp_full.weights).norm() > 0.0);
}

TEST_CASE("fit validates its inputs") {
  Matrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  LabelMatrix labels(4, 1);
  labels.set(0, 0, 1);
  labels.set(1, 0, 0);

  SUBCASE("graph required for the graph-prior family") {
    CHECK_THROWS_AS(fit(ModelKind::kLgp, x, labels), std::invalid_argument);
  }
  SUBCASE("label row count must match") {
    LabelMatrix wrong(3, 1);
    wrong.set(0, 0, 1);
    CHECK_THROWS_AS(fit(ModelKind::kId, x, wrong), std::invalid_argument);
  }
  SUBCASE("at least one label required") {
    LabelMatrix empty(4, 1);
    CHECK_THROWS_AS(fit(ModelKind::kId, x, empty), std::invalid_argument);
  }
  SUBCASE("graph size must match the points") {
    GraphPrior g = build_graph_prior(x.topRows(3));
    CHECK_THROWS_AS(fit(ModelKind::kLgp, x, labels, &g), std::invalid_argument);
  }
}

TEST_CASE("prediction applies stored scaling and conditions on labels") {
  Rng rng(110);
  const Dataset ds = two_blobs(rng, 20, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 2, 0.2);
  auto [scaled, scaling] = standardize(ds);
  const TrainedModel model =
      fit(ModelKind::kId, scaled.features, labels, nullptr, {}, &scaling);

  Vector raw(2);
  raw << 2.0, 0.0;  // well inside the positive blob, unscaled coordinates
  const double prior = predict(model, raw);
  const Vector scaled_pt =
      (raw.array() - Eigen::Map<const Eigen::ArrayXd>(scaling.mean.data(), 2)) /
      Eigen::Map<const Eigen::ArrayXd>(scaling.stdev.data(), 2);
  const double expect = logistic(model.weights.dot(scaled_pt) + model.bias);
  CHECK(prior == doctest::Approx(expect).epsilon(1e-12));

  // a positive label from a useful annotator must raise the posterior
  const double with_pos = predict(model, raw, {{0, 1}});
  const double with_neg = predict(model, raw, {{0, 0}});
  CHECK(with_pos > with_neg);

  CHECK_THROWS_AS(predict(model, raw, {{5, 1}}), std::out_of_range);
  Vector bad(3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(predict(model, bad), std::invalid_argument);
}

TEST_CASE("model serialization round-trips every field losslessly") {
  Rng rng(111);
  const Dataset ds = two_blobs(rng, 12, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 2, 0.3);
  auto [scaled, scaling] = standardize(ds);
  const GraphPrior graph = build_graph_prior(scaled.features, std::nullopt,
                                             std::nullopt, 0.8);
  const TrainedModel model =
      fit(ModelKind::kLgp, scaled.features, labels, &graph, {}, &scaling);

  TempDir tmp;
  const auto path = tmp.file("model.txt");
  save_model(model, path);
  const TrainedModel back = load_model(path);

  CHECK(back.kind == model.kind);
  CHECK(back.weights == model.weights);
  CHECK(back.bias == model.bias);
  REQUIRE(back.annotators.size() == model.annotators.size());
  for (std::size_t k = 0; k < model.annotators.size(); ++k) {
    CHECK(back.annotators[k].w == model.annotators[k].w);
    CHECK(back.annotators[k].gamma == model.annotators[k].gamma);
  }
  CHECK(back.posterior.p1 == model.posterior.p1);
  CHECK(back.scaling.mean == model.scaling.mean);
  CHECK(back.scaling.stdev == model.scaling.stdev);
  CHECK(back.eta == model.eta);
  CHECK(back.bandwidth == model.bandwidth);
  CHECK(back.sigma_min == model.sigma_min);
  CHECK(back.diagnostics.iterations == model.diagnostics.iterations);
  CHECK(back.diagnostics.converged == model.diagnostics.converged);
  CHECK(back.diagnostics.final_objective == model.diagnostics.final_objective);
  CHECK(back.diagnostics.objective_history == model.diagnostics.objective_history);

  // loaded model predicts identically
  for (int rep = 0; rep < 10; ++rep) {
    Vector pt(2);
    pt << 4.0 * rng.normal(), 4.0 * rng.normal();
    CHECK(predict(back, pt) == predict(model, pt));
    CHECK(predict(back, pt, {{0, 1}}) == predict(model, pt, {{0, 1}}));
  }
}

TEST_CASE("model files are strict about their keys") {
  Rng rng(112);
  const Dataset ds = two_blobs(rng, 10, 2.0);
  const LabelMatrix labels = noisy_labels(rng, *ds.ground_truth, 1, 0.2);
  const TrainedModel model = fit(ModelKind::kId, ds.features, labels);

  TempDir tmp;
  const auto path = tmp.file("model.txt");
  save_model(model, path);
  const std::string text = malss::testing::read_file(path);

  SUBCASE("unknown key") {
    malss::testing::write_file(path, text + "mystery = 1\n");
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
  }
  SUBCASE("duplicate key") {
    malss::testing::write_file(path, text + "bias = 0\n");
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
  }
  SUBCASE("missing key") {
    const auto pos = text.find("bias");
    const auto end = text.find('\n', pos);
    malss::testing::write_file(path,
                               text.substr(0, pos) + text.substr(end + 1));
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
  }
  SUBCASE("wrong version line") {
    malss::testing::write_file(path, "malss model v9\n" +
                                         text.substr(text.find('\n') + 1));
    CHECK_THROWS_AS(load_model(path), std::runtime_error);
  }
}
