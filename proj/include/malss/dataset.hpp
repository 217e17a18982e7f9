#pragma once

#include "malss/util.hpp"

#include <optional>
#include <string>
#include <vector>

namespace malss {

/// Feature table with optional binary ground truth.
struct Dataset {
  Matrix features;  // num_points x num_features
  std::optional<std::vector<int>> ground_truth;  // entries in {0,1}
  std::vector<std::string> feature_names;        // empty when the CSV had no header

  int num_points() const { return static_cast<int>(features.rows()); }
  int num_features() const { return static_cast<int>(features.cols()); }

  /// Throws std::runtime_error on shape/value violations.
  void validate() const;
};

/// Per-feature affine scaling fitted on a training set.
struct ScalingParams {
  Vector mean;   // per feature
  Vector stdev;  // per feature, strictly positive (zero-variance columns -> 1)

  static ScalingParams identity(int num_features);
};

/// One annotator's label for one point.
struct Observation {
  int annotator = 0;
  int label = 0;
};

/// Sparse point x annotator label storage; any subset of annotators may
/// label any point.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(int num_points, int num_annotators);

  int num_points() const { return static_cast<int>(by_point_.size()); }
  int num_annotators() const { return num_annotators_; }

  /// Insert or overwrite; label must be 0/1, indices in range.
  void set(int point, int annotator, int label);

  /// Labels for one point, sorted by annotator index.
  const std::vector<Observation>& labels_of(int point) const;

  std::size_t total_labels() const;

  bool operator==(const LabelMatrix& other) const;

 private:
  std::vector<std::vector<Observation>> by_point_;
  int num_annotators_ = 0;
};

/// Read a feature CSV. When label_column is given (negative counts from the
/// end, -1 = last), that column becomes ground truth and is removed from the
/// features. Errors name the file, row and column.
Dataset load_csv(const std::string& path, bool has_header,
                 std::optional<int> label_column = std::nullopt);

/// Write a headered CSV: features (named x1..xD when feature_names is
/// empty), plus ground truth as a final `label` column when present.
void save_csv(const Dataset& ds, const std::string& path);

/// Label CSV with header `point,annotator,label`, 0-based indices.
LabelMatrix load_labels_csv(const std::string& path);
void save_labels_csv(const LabelMatrix& labels, const std::string& path);

/// Fit mean/std on ds and return the standardized copy. Population standard
/// deviation; zero-variance columns keep their values and get stdev 1.
std::pair<Dataset, ScalingParams> standardize(const Dataset& ds);

/// (x - mean) / stdev applied row-wise.
Matrix apply_scaling(const Matrix& features, const ScalingParams& scaling);

struct Fold {
  std::vector<int> train;  // ascending
  std::vector<int> test;   // ascending
};

/// Stratified k-fold split on ground truth (required). Every class must
/// have at least k members. Deterministic in (dataset order, k, seed).
std::vector<Fold> stratified_kfold(const Dataset& ds, int k, std::uint64_t seed);

/// Keep all labels for exactly round(proportion * num_points) points chosen
/// stratified by `strata` (largest-remainder apportionment), drop the rest.
/// proportion 1 returns the input unchanged.
LabelMatrix mask_labels(const LabelMatrix& labels, double proportion,
                        std::uint64_t seed, const std::vector<int>& strata);

/// Ground truth when present; otherwise per-point majority vote over the
/// annotators (ties -> 1, unlabeled points get stratum -1).
std::vector<int> stratification_key(const Dataset& ds, const LabelMatrix& labels);

/// Row subsets with reindexing (indices must be valid; order preserved).
Dataset subset_dataset(const Dataset& ds, const std::vector<int>& indices);
LabelMatrix subset_labels(const LabelMatrix& labels, const std::vector<int>& indices);

}  // namespace malss
