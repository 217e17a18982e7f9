#include "malss/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace malss {

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return in;
}

std::ofstream create_or_throw(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (features.rows() == 0 || features.cols() == 0) {
    throw std::runtime_error("dataset: empty feature matrix");
  }
  if (!features.allFinite()) {
    throw std::runtime_error("dataset: non-finite feature value");
  }
  if (ground_truth) {
    if (static_cast<Eigen::Index>(ground_truth->size()) != features.rows()) {
      throw std::runtime_error("dataset: ground truth length != number of rows");
    }
    for (const int y : *ground_truth) {
      if (y != 0 && y != 1) {
        throw std::runtime_error("dataset: ground-truth labels must be 0 or 1");
      }
    }
  }
  if (!feature_names.empty() &&
      static_cast<Eigen::Index>(feature_names.size()) != features.cols()) {
    throw std::runtime_error("dataset: header width != number of feature columns");
  }
}

ScalingParams ScalingParams::identity(int num_features) {
  ScalingParams p;
  p.mean = Vector::Zero(num_features);
  p.stdev = Vector::Ones(num_features);
  return p;
}

LabelMatrix::LabelMatrix(int num_points, int num_annotators)
    : by_point_(num_points), num_annotators_(num_annotators) {
  if (num_points < 0 || num_annotators < 0) {
    throw std::invalid_argument("LabelMatrix: negative dimensions");
  }
}

void LabelMatrix::set(int point, int annotator, int label) {
  if (point < 0 || point >= num_points()) {
    throw std::out_of_range("LabelMatrix::set: point index " + std::to_string(point) +
                            " out of range [0, " + std::to_string(num_points()) + ")");
  }
  if (annotator < 0 || annotator >= num_annotators_) {
    throw std::out_of_range("LabelMatrix::set: annotator index " +
                            std::to_string(annotator) + " out of range [0, " +
                            std::to_string(num_annotators_) + ")");
  }
  if (label != 0 && label != 1) {
    throw std::invalid_argument("LabelMatrix::set: label must be 0 or 1, got " +
                                std::to_string(label));
  }
  auto& row = by_point_[point];
  auto it = std::lower_bound(row.begin(), row.end(), annotator,
                             [](const Observation& o, int t) { return o.annotator < t; });
  if (it != row.end() && it->annotator == annotator) {
    it->label = label;
  } else {
    row.insert(it, Observation{annotator, label});
  }
}

const std::vector<Observation>& LabelMatrix::labels_of(int point) const {
  if (point < 0 || point >= num_points()) {
    throw std::out_of_range("LabelMatrix::labels_of: point index out of range");
  }
  return by_point_[point];
}

std::size_t LabelMatrix::total_labels() const {
  std::size_t n = 0;
  for (const auto& row : by_point_) n += row.size();
  return n;
}

bool LabelMatrix::operator==(const LabelMatrix& other) const {
  if (num_annotators_ != other.num_annotators_) return false;
  if (by_point_.size() != other.by_point_.size()) return false;
  for (std::size_t i = 0; i < by_point_.size(); ++i) {
    const auto& a = by_point_[i];
    const auto& b = other.by_point_[i];
    if (a.size() != b.size()) return false;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[j].annotator != b[j].annotator || a[j].label != b[j].label) return false;
    }
  }
  return true;
}

Dataset load_csv(const std::string& path, bool has_header,
                 std::optional<int> label_column) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<int> row_lines;
  int line_no = 0;
  std::size_t width = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line, ',');
    if (has_header && !saw_header) {
      for (const auto& f : fields) names.push_back(trim(f));
      width = fields.size();
      saw_header = true;
      continue;
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " fields, got " +
                               std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      row[j] = parse_double(fields[j], path + " line " + std::to_string(line_no) +
                                           " column " + std::to_string(j + 1));
    }
    rows.push_back(std::move(row));
    row_lines.push_back(line_no);
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");

  int label_idx = -1;
  if (label_column) {
    label_idx = *label_column < 0 ? static_cast<int>(width) + *label_column
                                  : *label_column;
    if (label_idx < 0 || label_idx >= static_cast<int>(width)) {
      throw std::runtime_error(path + ": label column " + std::to_string(*label_column) +
                               " out of range for " + std::to_string(width) + " columns");
    }
    if (width < 2) {
      throw std::runtime_error(path + ": need at least one feature column besides the label");
    }
  }

  Dataset ds;
  const int d = static_cast<int>(width) - (label_column ? 1 : 0);
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  if (label_column) ds.ground_truth.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int jj = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (static_cast<int>(j) == label_idx) {
        const double y = rows[i][j];
        if (y != 0.0 && y != 1.0) {
          throw std::runtime_error(path + " line " + std::to_string(row_lines[i]) +
                                   ": label must be 0 or 1, got " + format_g17(y));
        }
        ds.ground_truth->push_back(static_cast<int>(y));
      } else {
        ds.features(static_cast<Eigen::Index>(i), jj++) = rows[i][j];
      }
    }
  }
  if (!names.empty()) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (static_cast<int>(j) != label_idx) ds.feature_names.push_back(names[j]);
    }
  }
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out = create_or_throw(path);
  for (int j = 0; j < ds.num_features(); ++j) {
    const std::string name = j < static_cast<int>(ds.feature_names.size())
                                 ? ds.feature_names[j]
                                 : "x" + std::to_string(j + 1);
    out << (j ? "," : "") << name;
  }
  if (ds.ground_truth) out << ",label";
  out << "\n";
  for (int i = 0; i < ds.num_points(); ++i) {
    for (int j = 0; j < ds.num_features(); ++j) {
      out << (j ? "," : "") << format_g17(ds.features(i, j));
    }
    if (ds.ground_truth) out << "," << (*ds.ground_truth)[i];
    out << "\n";
  }
}

LabelMatrix load_labels_csv(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "point,annotator,label") {
    throw std::runtime_error(path + ": expected header 'point,annotator,label'");
  }
  struct Entry {
    int point, annotator, label;
  };
  std::vector<Entry> entries;
  int max_point = -1, max_annotator = -1;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": expected 3 fields");
    }
    const std::string ctx = path + " line " + std::to_string(line_no);
    Entry e;
    e.point = static_cast<int>(parse_long(fields[0], ctx + " (point)"));
    e.annotator = static_cast<int>(parse_long(fields[1], ctx + " (annotator)"));
    e.label = static_cast<int>(parse_long(fields[2], ctx + " (label)"));
    if (e.point < 0 || e.annotator < 0) {
      throw std::runtime_error(ctx + ": indices must be non-negative");
    }
    if (e.label != 0 && e.label != 1) {
      throw std::runtime_error(ctx + ": label must be 0 or 1");
    }
    max_point = std::max(max_point, e.point);
    max_annotator = std::max(max_annotator, e.annotator);
    entries.push_back(e);
  }
  LabelMatrix labels(max_point + 1, max_annotator + 1);
  for (const Entry& e : entries) labels.set(e.point, e.annotator, e.label);
  return labels;
}

void save_labels_csv(const LabelMatrix& labels, const std::string& path) {
  std::ofstream out = create_or_throw(path);
  out << "point,annotator,label\n";
  for (int i = 0; i < labels.num_points(); ++i) {
    for (const Observation& o : labels.labels_of(i)) {
      out << i << "," << o.annotator << "," << o.label << "\n";
    }
  }
}

std::pair<Dataset, ScalingParams> standardize(const Dataset& ds) {
  const int d = ds.num_features();
  const int n = ds.num_points();
  ScalingParams p;
  p.mean = ds.features.colwise().mean();
  p.stdev.resize(d);
  for (int j = 0; j < d; ++j) {
    const double var =
        (ds.features.col(j).array() - p.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    p.stdev[j] = sd > 0.0 ? sd : 1.0;
  }
  Dataset out = ds;
  out.features = apply_scaling(ds.features, p);
  return {std::move(out), std::move(p)};
}

Matrix apply_scaling(const Matrix& features, const ScalingParams& scaling) {
  if (features.cols() != scaling.mean.size() ||
      features.cols() != scaling.stdev.size()) {
    throw std::runtime_error("apply_scaling: feature width does not match scaling");
  }
  Matrix out = features;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j) = (features.col(j).array() - scaling.mean[j]) / scaling.stdev[j];
  }
  return out;
}

std::vector<Fold> stratified_kfold(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  if (!ds.ground_truth) {
    throw std::runtime_error("stratified_kfold: dataset has no ground truth");
  }
  const auto& y = *ds.ground_truth;
  std::vector<int> idx0, idx1;
  for (int i = 0; i < ds.num_points(); ++i) (y[i] ? idx1 : idx0).push_back(i);
  for (const auto* cls : {&idx0, &idx1}) {
    if (static_cast<int>(cls->size()) < k) {
      throw std::runtime_error("stratified_kfold: class with " +
                               std::to_string(cls->size()) +
                               " members cannot fill " + std::to_string(k) + " folds");
    }
  }
  Rng rng(seed);
  std::vector<Fold> folds(k);
  for (auto* cls : {&idx0, &idx1}) {
    rng.shuffle(*cls);
    // Round-robin deal keeps per-fold class counts within one of each other.
    for (std::size_t j = 0; j < cls->size(); ++j) {
      folds[j % k].test.push_back((*cls)[j]);
    }
  }
  for (int f = 0; f < k; ++f) {
    std::sort(folds[f].test.begin(), folds[f].test.end());
    std::vector<char> in_test(ds.num_points(), 0);
    for (const int i : folds[f].test) in_test[i] = 1;
    for (int i = 0; i < ds.num_points(); ++i) {
      if (!in_test[i]) folds[f].train.push_back(i);
    }
  }
  return folds;
}

LabelMatrix mask_labels(const LabelMatrix& labels, double proportion,
                        std::uint64_t seed, const std::vector<int>& strata) {
  const int n = labels.num_points();
  if (static_cast<int>(strata.size()) != n) {
    throw std::invalid_argument("mask_labels: strata length != number of points");
  }
  if (!(proportion > 0.0) || proportion > 1.0) {
    throw std::invalid_argument("mask_labels: proportion must be in (0, 1]");
  }
  if (proportion == 1.0) return labels;

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[strata[i]].push_back(i);

  const long total_keep = std::lround(proportion * n);
  // Largest-remainder apportionment across strata.
  struct Share {
    int stratum;
    long base;
    double remainder;
  };
  std::vector<Share> shares;
  long base_sum = 0;
  for (const auto& [stratum, members] : groups) {
    const double exact = proportion * static_cast<double>(members.size());
    const long base = static_cast<long>(std::floor(exact));
    shares.push_back({stratum, base, exact - static_cast<double>(base)});
    base_sum += base;
  }
  long extra = total_keep - base_sum;
  std::sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return a.stratum < b.stratum;
  });
  std::map<int, long> keep_count;
  for (auto& s : shares) {
    keep_count[s.stratum] = s.base + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
  }

  Rng rng(seed);
  std::vector<char> retained(n, 0);
  for (auto& [stratum, members] : groups) {
    rng.shuffle(members);
    const long keep = std::min<long>(keep_count[stratum],
                                     static_cast<long>(members.size()));
    for (long j = 0; j < keep; ++j) retained[members[j]] = 1;
  }

  LabelMatrix out(n, labels.num_annotators());
  for (int i = 0; i < n; ++i) {
    if (!retained[i]) continue;
    for (const Observation& o : labels.labels_of(i)) {
      out.set(i, o.annotator, o.label);
    }
  }
  return out;
}

std::vector<int> stratification_key(const Dataset& ds, const LabelMatrix& labels) {
  if (ds.ground_truth) return *ds.ground_truth;
  std::vector<int> key(labels.num_points(), -1);
  for (int i = 0; i < labels.num_points(); ++i) {
    const auto& obs = labels.labels_of(i);
    if (obs.empty()) continue;
    int ones = 0;
    for (const Observation& o : obs) ones += o.label;
    key[i] = (2 * ones >= static_cast<int>(obs.size())) ? 1 : 0;
  }
  return key;
}

Dataset subset_dataset(const Dataset& ds, const std::vector<int>& indices) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.num_features());
  if (ds.ground_truth) out.ground_truth.emplace();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= ds.num_points()) {
      throw std::out_of_range("subset_dataset: index out of range");
    }
    out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(i);
    if (ds.ground_truth) out.ground_truth->push_back((*ds.ground_truth)[i]);
  }
  return out;
}

LabelMatrix subset_labels(const LabelMatrix& labels, const std::vector<int>& indices) {
  LabelMatrix out(static_cast<int>(indices.size()), labels.num_annotators());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    for (const Observation& o : labels.labels_of(indices[r])) {
      out.set(static_cast<int>(r), o.annotator, o.label);
    }
  }
  return out;
}

}  // namespace malss
