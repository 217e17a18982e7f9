#include "malss/eval.hpp"

#include "malss/graph.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace malss {

std::vector<int> majority_vote(const LabelMatrix& labels) {
  std::vector<int> out(labels.num_points(), -1);
  for (int i = 0; i < labels.num_points(); ++i) {
    const auto& obs = labels.labels_of(i);
    if (obs.empty()) continue;
    int ones = 0;
    for (const Observation& o : obs) ones += o.label;
    out[i] = (2 * ones >= static_cast<int>(obs.size())) ? 1 : 0;
  }
  return out;
}

LogisticModel logistic_fit(const Matrix& x, const std::vector<int>& y, double ridge) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (n == 0) throw std::invalid_argument("logistic_fit: no training rows");
  if (static_cast<int>(y.size()) != n) {
    throw std::invalid_argument("logistic_fit: label count != row count");
  }
  int positives = 0;
  for (const int v : y) {
    if (v != 0 && v != 1) {
      throw std::invalid_argument("logistic_fit: labels must be 0 or 1");
    }
    positives += v;
  }
  if (positives == 0 || positives == n) {
    throw std::invalid_argument(
        "logistic_fit: training labels are all one class");
  }
  if (ridge < 0.0) throw std::invalid_argument("logistic_fit: ridge must be >= 0");

  // theta = [coef; intercept]; maximize sum_i log p(y_i) - ridge * |coef|^2.
  Objective obj = [&](const Vector& theta, Vector& grad) {
    const auto coef = theta.head(d);
    const double intercept = theta[d];
    grad = Vector::Zero(d + 1);
    double value = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = coef.dot(x.row(i)) + intercept;
      const auto [log_p, log_1mp] = log_logistic_pair(u);
      value += y[i] ? log_p : log_1mp;
      const double c = static_cast<double>(y[i]) - logistic(u);
      grad.head(d) += c * x.row(i).transpose();
      grad[d] += c;
    }
    value -= ridge * coef.squaredNorm();
    grad.head(d) -= 2.0 * ridge * coef;
    return value;
  };

  OptimConfig cfg;
  cfg.max_iterations = 500;
  cfg.gradient_tolerance = 1e-6;
  const OptimResult res = maximize(obj, Vector::Zero(d + 1), cfg);

  LogisticModel model;
  model.coef = res.x.head(d);
  model.intercept = res.x[d];
  model.iterations = res.iterations;
  model.gradient_norm = res.gradient_norm;
  model.converged = res.status == OptimStatus::kConverged &&
                    res.gradient_norm <= cfg.gradient_tolerance;
  return model;
}

double logistic_prob(const LogisticModel& model, const Vector& x) {
  if (x.size() != model.coef.size()) {
    throw std::invalid_argument("logistic_prob: feature size mismatch");
  }
  return logistic(model.coef.dot(x) + model.intercept);
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw std::invalid_argument("accuracy: prediction/truth size mismatch or empty");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

RocResult roc_auc(const Vector& scores, const std::vector<int>& truth) {
  const int n = static_cast<int>(scores.size());
  if (n == 0 || static_cast<int>(truth.size()) != n) {
    throw std::invalid_argument("roc_auc: score/truth size mismatch or empty");
  }
  long pos = 0, neg = 0;
  for (const int t : truth) {
    if (t == 1) {
      ++pos;
    } else if (t == 0) {
      ++neg;
    } else {
      throw std::invalid_argument("roc_auc: truth labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_auc: need both classes to rank");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  RocResult res;
  res.points.push_back({0.0, 0.0});
  long tp = 0, fp = 0;
  long area2 = 0;  // twice the area in units of (1/pos)*(1/neg) cells
  int i = 0;
  while (i < n) {
    // One threshold group: all indices sharing this score.
    long dtp = 0, dfp = 0;
    const double s = scores[order[i]];
    while (i < n && scores[order[i]] == s) {
      if (truth[order[i]] == 1) {
        ++dtp;
      } else {
        ++dfp;
      }
      ++i;
    }
    // Trapezoid over the group: width dfp, heights tp and tp + dtp.
    area2 += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    res.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
  }
  res.auc = static_cast<double>(area2) /
            (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return res;
}

namespace {

constexpr const char* kResultsHeader =
    "method,proportion,seed,fold,accuracy,auc,converged,iterations";

bool is_em_method(const std::string& m) {
  return m == "lgp" || m == "id" || m == "ml-original";
}

// annotator-<t>-lr -> t, or -1 when the name has another shape.
int annotator_index_of(const std::string& m) {
  const std::string pre = "annotator-";
  const std::string suf = "-lr";
  if (m.size() <= pre.size() + suf.size()) return -1;
  if (m.compare(0, pre.size(), pre) != 0) return -1;
  if (m.compare(m.size() - suf.size(), suf.size(), suf) != 0) return -1;
  const std::string mid = m.substr(pre.size(), m.size() - pre.size() - suf.size());
  for (const char c : mid) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return -1;
  }
  return static_cast<int>(std::stol(mid));
}

std::uint64_t mask_seed(std::uint64_t seed, int fold, double proportion) {
  return mix_seed(mix_seed(seed, 0x5EEDu + static_cast<std::uint64_t>(fold)),
                  std::bit_cast<std::uint64_t>(proportion));
}

// Everything one (fold, proportion) shares across methods.
struct CellContext {
  Matrix x_train;       // standardized training features
  Matrix x_test_raw;    // untouched test features (EM predict rescales)
  Matrix x_test;        // standardized test features (baselines)
  LabelMatrix masked;
  std::vector<int> gt_test;
  ScalingParams scaling;
  std::optional<GraphPrior> graph;
};

CellContext prepare_cell(const Dataset& ds, const LabelMatrix& labels,
                         const std::vector<int>& train_idx,
                         const std::vector<int>& test_idx, double proportion,
                         const ExperimentConfig& config, std::uint64_t seed,
                         int fold, bool need_graph) {
  if (!ds.ground_truth) {
    throw std::runtime_error("experiment: dataset has no ground truth");
  }
  if (labels.num_points() != ds.num_points()) {
    throw std::invalid_argument("experiment: labels do not cover the dataset");
  }
  CellContext ctx;
  const Dataset train_ds = subset_dataset(ds, train_idx);
  const LabelMatrix train_labels = subset_labels(labels, train_idx);
  ctx.masked = mask_labels(train_labels, proportion, mask_seed(seed, fold, proportion),
                           *train_ds.ground_truth);
  ctx.scaling = config.standardize ? standardize(train_ds).second
                                   : ScalingParams::identity(ds.num_features());
  ctx.x_train = apply_scaling(train_ds.features, ctx.scaling);
  ctx.x_test_raw = subset_dataset(ds, test_idx).features;
  ctx.x_test = apply_scaling(ctx.x_test_raw, ctx.scaling);
  ctx.gt_test.reserve(test_idx.size());
  for (const int i : test_idx) ctx.gt_test.push_back((*ds.ground_truth)[i]);
  if (need_graph) {
    ctx.graph = build_graph_prior(ctx.x_train, config.bandwidth, config.knn,
                                  config.eta);
  }
  return ctx;
}

ResultRow score_and_fill(ResultRow row, const Vector& scores,
                         const std::vector<int>& gt_test) {
  std::vector<int> pred(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    pred[static_cast<std::size_t>(i)] = scores[i] >= 0.5 ? 1 : 0;
  }
  row.accuracy = accuracy(pred, gt_test);
  row.auc = roc_auc(scores, gt_test).auc;
  return row;
}

CellOutcome run_method(const CellContext& ctx, const std::string& method,
                       const ExperimentConfig& config, double proportion,
                       std::uint64_t seed, int fold, bool keep_model) {
  CellOutcome out;
  ResultRow row;
  row.method = method;
  row.proportion = proportion;
  row.seed = seed;
  row.fold = fold;
  try {
    const int n_test = static_cast<int>(ctx.x_test.rows());
    Vector scores(n_test);
    if (is_em_method(method)) {
      const ModelKind kind = model_kind_from_string(method);
      FitConfig fit_cfg = config.fit;
      const GraphPrior* graph =
          kind == ModelKind::kLgp ? &ctx.graph.value() : nullptr;
      TrainedModel model =
          fit(kind, ctx.x_train, ctx.masked, graph, fit_cfg, &ctx.scaling);
      for (int i = 0; i < n_test; ++i) {
        scores[i] = predict(model, ctx.x_test_raw.row(i).transpose());
      }
      row.converged = model.diagnostics.converged;
      row.iterations = model.diagnostics.iterations;
      if (keep_model) out.model = std::move(model);
    } else {
      // Baselines: plain logistic regression on the points the rule covers.
      std::vector<int> keep, y;
      if (method == "majority-vote-lr") {
        const std::vector<int> mv = majority_vote(ctx.masked);
        for (int i = 0; i < static_cast<int>(mv.size()); ++i) {
          if (mv[i] >= 0) {
            keep.push_back(i);
            y.push_back(mv[i]);
          }
        }
      } else {
        const int t = annotator_index_of(method);
        if (t < 0 || t >= ctx.masked.num_annotators()) {
          throw std::invalid_argument("unknown method: '" + method + "'");
        }
        for (int i = 0; i < ctx.masked.num_points(); ++i) {
          for (const Observation& o : ctx.masked.labels_of(i)) {
            if (o.annotator == t) {
              keep.push_back(i);
              y.push_back(o.label);
              break;
            }
          }
        }
      }
      Matrix x_keep(keep.size(), ctx.x_train.cols());
      for (std::size_t r = 0; r < keep.size(); ++r) {
        x_keep.row(static_cast<Eigen::Index>(r)) = ctx.x_train.row(keep[r]);
      }
      const LogisticModel model = logistic_fit(x_keep, y, config.baseline_ridge);
      for (int i = 0; i < n_test; ++i) {
        scores[i] = logistic_prob(model, ctx.x_test.row(i).transpose());
      }
      row.converged = model.converged;
      row.iterations = model.iterations;
    }
    row = score_and_fill(std::move(row), scores, ctx.gt_test);
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
    row.accuracy = std::numeric_limits<double>::quiet_NaN();
    row.auc = std::numeric_limits<double>::quiet_NaN();
    row.converged = false;
    row.iterations = 0;
  }
  out.row = std::move(row);
  return out;
}

std::vector<std::string> expand_methods(const std::vector<std::string>& methods,
                                        int num_labelers) {
  std::vector<std::string> out;
  for (const std::string& m : methods) {
    if (m == "annotator-lr") {
      for (int t = 0; t < num_labelers; ++t) {
        out.push_back("annotator-" + std::to_string(t) + "-lr");
      }
    } else if (is_em_method(m) || m == "majority-vote-lr" ||
               annotator_index_of(m) >= 0) {
      out.push_back(m);
    } else {
      throw std::invalid_argument(
          "unknown method: '" + m +
          "' (expected lgp, id, ml-original, majority-vote-lr or annotator-lr)");
    }
  }
  return out;
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.proportion != b.proportion) return a.proportion < b.proportion;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.fold < b.fold;
  });
}

}  // namespace

CellOutcome evaluate_cell(const Dataset& ds, const LabelMatrix& labels,
                          const std::vector<int>& train_idx,
                          const std::vector<int>& test_idx, double proportion,
                          const std::string& method, const ExperimentConfig& config,
                          std::uint64_t seed, int fold, bool keep_model) {
  const CellContext ctx = prepare_cell(ds, labels, train_idx, test_idx, proportion,
                                       config, seed, fold, method == "lgp");
  return run_method(ctx, method, config, proportion, seed, fold, keep_model);
}

ExperimentResult run_experiment(const Dataset& ds, const ExperimentConfig& config) {
  ds.validate();
  if (!ds.ground_truth) {
    throw std::runtime_error("run_experiment: dataset has no ground truth");
  }
  if (config.seeds.empty()) {
    throw std::invalid_argument("run_experiment: need at least one seed");
  }
  if (config.proportions.empty()) {
    throw std::invalid_argument("run_experiment: need at least one proportion");
  }
  for (const double p : config.proportions) {
    if (!(p > 0.0) || p > 1.0) {
      throw std::invalid_argument("run_experiment: proportions must be in (0, 1]");
    }
  }
  const std::vector<std::string> methods =
      expand_methods(config.methods, config.sim.num_labelers);
  if (methods.empty()) {
    throw std::invalid_argument("run_experiment: no methods selected");
  }
  const bool need_graph =
      std::find(methods.begin(), methods.end(), "lgp") != methods.end();

  std::vector<std::vector<ResultRow>> per_seed(config.seeds.size());
  auto work_seed = [&](std::size_t si) {
    const std::uint64_t seed = config.seeds[si];
    SimConfig sim_cfg = config.sim;
    sim_cfg.seed = seed;
    const SimResult sim = simulate_labelers(ds, sim_cfg);
    const std::vector<Fold> folds = stratified_kfold(ds, config.folds, seed);
    for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
      for (const double p : config.proportions) {
        const CellContext ctx = prepare_cell(ds, sim.labels, folds[f].train,
                                             folds[f].test, p, config, seed, f,
                                             need_graph);
        for (const std::string& m : methods) {
          per_seed[si].push_back(
              run_method(ctx, m, config, p, seed, f, false).row);
        }
      }
    }
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1 || config.seeds.size() == 1) {
    for (std::size_t si = 0; si < config.seeds.size(); ++si) work_seed(si);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(jobs, static_cast<int>(config.seeds.size()));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t si = next.fetch_add(1);
          if (si >= config.seeds.size()) return;
          work_seed(si);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  for (const auto& rows : per_seed) {
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  sort_rows(result.rows);
  return result;
}

std::vector<AggregateRow> ExperimentResult::aggregates() const {
  // rows are sorted, so (method, proportion) groups are contiguous.
  std::vector<AggregateRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    std::vector<double> accs, aucs;
    while (j < rows.size() && rows[j].method == rows[i].method &&
           rows[j].proportion == rows[i].proportion) {
      if (!rows[j].failed) {
        accs.push_back(rows[j].accuracy);
        aucs.push_back(rows[j].auc);
      }
      ++j;
    }
    AggregateRow agg;
    agg.method = rows[i].method;
    agg.proportion = rows[i].proportion;
    agg.count = static_cast<int>(accs.size());
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
      if (v.empty()) {
        mean = std::numeric_limits<double>::quiet_NaN();
        sd = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      if (v.size() == 1) {
        sd = 0.0;
        return;
      }
      double ss = 0.0;
      for (const double x : v) ss += (x - mean) * (x - mean);
      sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    mean_std(accs, agg.accuracy_mean, agg.accuracy_std);
    mean_std(aucs, agg.auc_mean, agg.auc_std);
    out.push_back(std::move(agg));
    i = j;
  }
  return out;
}

void save_results_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results file: " + path);
  out << kResultsHeader << "\n";
  for (const ResultRow& r : result.rows) {
    out << r.method << "," << format_g17(r.proportion) << "," << r.seed << ","
        << r.fold << "," << format_g17(r.accuracy) << "," << format_g17(r.auc)
        << "," << (r.converged ? 1 : 0) << "," << r.iterations << "\n";
  }
}

void save_aggregate_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write aggregate file: " + path);
  out << "method,proportion,count,accuracy_mean,accuracy_std,auc_mean,auc_std\n";
  for (const AggregateRow& a : result.aggregates()) {
    out << a.method << "," << format_g17(a.proportion) << "," << a.count << ","
        << format_g17(a.accuracy_mean) << "," << format_g17(a.accuracy_std) << ","
        << format_g17(a.auc_mean) << "," << format_g17(a.auc_std) << "\n";
  }
}

}  // namespace malss
