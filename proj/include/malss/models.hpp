#pragma once

#include "malss/annotators.hpp"
#include "malss/dataset.hpp"
#include "malss/graph.hpp"
#include "malss/optim.hpp"

#include <string>
#include <vector>

namespace malss {

enum class ModelKind {
  kId,         // instance-difficulty classifier prior: logistic(alpha'x + beta)
  kLgp,        // graph-regularized classifier prior: logistic(xi'x + xi0)
  kMlOriginal  // kId machinery with annotator noise frozen at w=0
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct IdParams {
  Vector alpha;
  double beta = 0.0;
};

struct LgpParams {
  Vector xi;
  double xi0 = 0.0;  // intercept; excluded from the graph penalty
};

/// Per-point posterior probability of the positive class.
struct Posterior {
  Vector p1;
};

struct FitDiagnostics {
  int iterations = 0;          // EM rounds executed
  bool converged = false;      // parameter-change rule met before the cap
  double final_objective = 0.0;  // observed-data log-likelihood at the end
  std::vector<double> objective_history;  // one entry per EM round
};

struct FitConfig {
  double epsilon = 1e-6;       // threshold on summed squared annotator-parameter change
  int max_em_iterations = 200;
  double objective_tolerance = 1e-9;  // secondary stop on |objective change|
  double sigma_min = kDefaultSigmaMin;
  double annotator_ridge = 0.0;  // optional L2 on (w_t, gamma_t)
  OptimConfig mstep;
};

/// A fitted model: classifier weights, annotator noise parameters, the
/// training posterior, and everything needed to score new points.
struct TrainedModel {
  ModelKind kind = ModelKind::kId;
  Vector weights;   // alpha (kId/kMlOriginal) or xi (kLgp)
  double bias = 0.0;  // beta or xi0
  std::vector<AnnotatorParams> annotators;
  Posterior posterior;     // training-set p(z=1 | x, labels) at the final params
  ScalingParams scaling;   // applied to raw inputs before scoring
  double eta = 0.0;        // graph-penalty strength (kLgp only)
  double bandwidth = 0.0;  // graph bandwidth (kLgp only)
  double sigma_min = kDefaultSigmaMin;
  FitDiagnostics diagnostics;
};

/// Posterior over the true label for every point given current parameters.
/// The classifier prior is q_i = logistic(weights'x_i + bias); annotator
/// factors multiply in via their Gaussian label likelihoods.
Posterior e_step(const Vector& weights, double bias,
                 const std::vector<AnnotatorParams>& annotators, const Matrix& x,
                 const LabelMatrix& labels, double sigma_min = kDefaultSigmaMin);

/// Family-named E-steps; both share the same functional form, differing only
/// in which parameters play the classifier role.
Posterior e_step_id(const IdParams& params,
                    const std::vector<AnnotatorParams>& annotators, const Matrix& x,
                    const LabelMatrix& labels, double sigma_min = kDefaultSigmaMin);
Posterior e_step_lgp(const LgpParams& params,
                     const std::vector<AnnotatorParams>& annotators, const Matrix& x,
                     const LabelMatrix& labels, double sigma_min = kDefaultSigmaMin);

/// Gradients of the EM surrogate for one model family, laid out to match the
/// packed parameter vector used by the M-step.
struct MStepGradients {
  Vector classifier;  // d/d(weights), then bias appended by the packer
  double bias = 0.0;
  std::vector<Vector> w;
  std::vector<double> gamma;
};

/// EM surrogate objective for the instance-difficulty family: expected
/// complete-data log-likelihood over labeled points under `post`, optionally
/// minus a ridge on annotator parameters. Gradients written when not null.
double m_step_objective_id(const IdParams& params,
                           const std::vector<AnnotatorParams>& annotators,
                           const Matrix& x, const LabelMatrix& labels,
                           const Posterior& post, MStepGradients* grads = nullptr,
                           double sigma_min = kDefaultSigmaMin,
                           double annotator_ridge = 0.0);

/// Same for the graph-prior family: adds -eta * xi' A xi (intercept exempt).
double m_step_objective_lgp(const LgpParams& params,
                            const std::vector<AnnotatorParams>& annotators,
                            const Matrix& x, const LabelMatrix& labels,
                            const GraphPrior& graph, const Posterior& post,
                            MStepGradients* grads = nullptr,
                            double sigma_min = kDefaultSigmaMin,
                            double annotator_ridge = 0.0);

/// Observed-data log-likelihood: sum over labeled points of
/// log sum_z q(z) prod_t N(y_t; z, sigma_t), plus the graph penalty for
/// kLgp. Unlabeled points contribute exactly zero and are skipped.
double observed_loglik(ModelKind kind, const Vector& weights, double bias,
                       const std::vector<AnnotatorParams>& annotators,
                       const Matrix& x, const LabelMatrix& labels,
                       const GraphPrior* graph = nullptr,
                       double sigma_min = kDefaultSigmaMin);

/// Full EM fit. `x` must already be standardized when scaling is used; pass
/// the fitted ScalingParams so the model can scale raw inputs at predict
/// time (identity when null). `graph` is required for kLgp and ignored
/// otherwise. Throws if the observed-data log-likelihood ever decreases by
/// more than 1e-8 between rounds.
TrainedModel fit(ModelKind kind, const Matrix& x, const LabelMatrix& labels,
                 const GraphPrior* graph = nullptr, const FitConfig& config = {},
                 const ScalingParams* scaling = nullptr);

/// p(z=1 | x_raw, labels) for one new point. `x_raw` is unscaled; labels may
/// be empty, in which case this is the classifier prior alone.
double predict(const TrainedModel& model, const Vector& x_raw,
               const std::vector<Observation>& labels = {});

/// Versioned text serialization, lossless for doubles.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace malss
