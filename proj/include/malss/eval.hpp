#pragma once

#include "malss/models.hpp"
#include "malss/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace malss {

/// Per-point majority label over all annotators; ties go to 1, points with
/// no labels get -1.
std::vector<int> majority_vote(const LabelMatrix& labels);

/// Plain ridge-penalized logistic regression (the baselines). The intercept
/// is unpenalized.
struct LogisticModel {
  Vector coef;
  double intercept = 0.0;
  int iterations = 0;
  bool converged = false;        // gradient-norm certificate met
  double gradient_norm = 0.0;
};

LogisticModel logistic_fit(const Matrix& x, const std::vector<int>& y,
                           double ridge = 1e-4);

double logistic_prob(const LogisticModel& model, const Vector& x);

/// Fraction of positions where pred == truth.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), tied scores grouped
  double auc = 0.0;
};

/// Trapezoidal ROC/AUC computed in integer arithmetic; exactly equals the
/// rank-sum statistic with half-credit ties. Requires both classes present.
RocResult roc_auc(const Vector& scores, const std::vector<int>& truth);

struct ExperimentConfig {
  std::vector<std::string> methods = {"lgp", "id", "ml-original",
                                      "majority-vote-lr", "annotator-lr"};
  std::vector<double> proportions = {0.2, 0.5, 0.8, 1.0};
  int folds = 5;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  SimConfig sim;       // per-seed simulation settings (seed field overridden)
  FitConfig fit;
  double baseline_ridge = 1e-4;
  double eta = 1.0;
  std::optional<double> bandwidth;  // graph bandwidth; median heuristic when unset
  std::optional<int> knn;
  bool standardize = true;
  int jobs = 1;  // seeds processed in parallel; results independent of jobs
};

struct ResultRow {
  std::string method;
  double proportion = 0.0;
  std::uint64_t seed = 0;
  int fold = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  bool converged = false;
  int iterations = 0;
  bool failed = false;   // fit threw; accuracy/auc are NaN
  std::string error;
};

struct AggregateRow {
  std::string method;
  double proportion = 0.0;
  int count = 0;  // non-failed rows
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double auc_mean = 0.0, auc_std = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;  // sorted by (method, proportion, seed, fold)
  std::vector<AggregateRow> aggregates() const;
};

/// Benchmark protocol: per seed, simulate labelers on the full dataset,
/// split into stratified folds, and for every (fold, proportion, method)
/// train on the masked training fold and score the held-out fold against
/// ground truth.
ExperimentResult run_experiment(const Dataset& ds, const ExperimentConfig& config);

/// One (fold, proportion, method) cell on explicit index sets; the test
/// hook behind run_experiment. Labels must cover the full dataset.
struct CellOutcome {
  ResultRow row;
  std::optional<TrainedModel> model;  // fitted model for EM methods
};
CellOutcome evaluate_cell(const Dataset& ds, const LabelMatrix& labels,
                          const std::vector<int>& train_idx,
                          const std::vector<int>& test_idx, double proportion,
                          const std::string& method, const ExperimentConfig& config,
                          std::uint64_t seed, int fold, bool keep_model = false);

void save_results_csv(const ExperimentResult& result, const std::string& path);
void save_aggregate_csv(const ExperimentResult& result, const std::string& path);

}  // namespace malss
