#include "malss/eval.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace malss;

std::optional<double> parse_bandwidth(const std::string& s) {
  if (s == "median") return std::nullopt;
  return parse_double(s, "--bandwidth");
}

std::string default_clusters_path(const std::string& out) {
  const std::string suffix = ".csv";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return out.substr(0, out.size() - suffix.size()) + "_clusters.csv";
  }
  return out + "_clusters.csv";
}

// Options shared by train and experiment.
struct FitFlags {
  double eta = 1.0;
  std::string bandwidth = "median";
  std::optional<int> knn;
  double sigma_min = kDefaultSigmaMin;
  double epsilon = 1e-6;
  int max_iterations = 200;
  double annotator_ridge = 0.0;
  bool no_standardize = false;

  void attach(CLI::App* cmd, bool with_graph) {
    if (with_graph) {
      cmd->add_option("--eta", eta, "Graph-penalty strength")
          ->capture_default_str()
          ->check(CLI::NonNegativeNumber);
      cmd->add_option("--bandwidth", bandwidth,
                      "Graph kernel bandwidth: a number or 'median'")
          ->capture_default_str();
      cmd->add_option("--knn", knn,
                      "Keep only each point's k nearest graph neighbours");
    }
    cmd->add_option("--sigma-min", sigma_min, "Lower clamp on annotator noise")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epsilon", epsilon,
                    "EM stop: summed squared annotator-parameter change")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iterations", max_iterations, "EM iteration cap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--annotator-ridge", annotator_ridge,
                    "L2 penalty on annotator noise parameters")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--no-standardize", no_standardize,
                  "Skip per-feature standardization");
  }

  FitConfig fit_config() const {
    FitConfig cfg;
    cfg.epsilon = epsilon;
    cfg.max_em_iterations = max_iterations;
    cfg.sigma_min = sigma_min;
    cfg.annotator_ridge = annotator_ridge;
    return cfg;
  }
};

int cmd_simulate(const std::string& input, bool has_header, int label_column,
                 const SimConfig& sim_cfg, const std::string& out,
                 std::string clusters_out) {
  const Dataset ds = load_csv(input, has_header, label_column);
  const SimResult sim = simulate_labelers(ds, sim_cfg);
  save_labels_csv(sim.labels, out);
  if (clusters_out.empty()) clusters_out = default_clusters_path(out);
  {
    std::ofstream cf(clusters_out);
    if (!cf) throw std::runtime_error("cannot write file: " + clusters_out);
    cf << "point,cluster\n";
    for (std::size_t i = 0; i < sim.assignments.size(); ++i) {
      cf << i << "," << sim.assignments[i] << "\n";
    }
  }
  std::cout << "wrote " << sim.labels.total_labels() << " labels to " << out
            << " and cluster assignments to " << clusters_out << "\n";
  for (int t = 0; t < sim_cfg.num_labelers; ++t) {
    std::cout << "labeler " << t << ": " << sim.off_cluster[t]
              << " off-cluster points, " << sim.flips[t] << " flipped\n";
  }
  return 0;
}

int cmd_train(const std::string& model_name, const std::string& data_path,
              const std::string& labels_path, const std::string& out,
              bool has_header, std::optional<int> label_column,
              const FitFlags& flags, const std::string& graph_dump) {
  const ModelKind kind = model_kind_from_string(model_name);
  const Dataset ds = load_csv(data_path, has_header, label_column);
  const LabelMatrix labels = load_labels_csv(labels_path);
  if (labels.num_points() > ds.num_points()) {
    throw std::runtime_error("labels reference point " +
                             std::to_string(labels.num_points() - 1) +
                             " but the dataset has only " +
                             std::to_string(ds.num_points()) + " rows");
  }
  // Labels may cover a prefix; extend to the full point count.
  LabelMatrix full(ds.num_points(), labels.num_annotators());
  for (int i = 0; i < labels.num_points(); ++i) {
    for (const Observation& o : labels.labels_of(i)) {
      full.set(i, o.annotator, o.label);
    }
  }

  ScalingParams scaling = ScalingParams::identity(ds.num_features());
  Matrix x = ds.features;
  if (!flags.no_standardize) {
    auto [std_ds, fitted] = standardize(ds);
    x = std::move(std_ds.features);
    scaling = std::move(fitted);
  }
  std::optional<GraphPrior> graph;
  if (kind == ModelKind::kLgp) {
    graph = build_graph_prior(x, parse_bandwidth(flags.bandwidth), flags.knn,
                              flags.eta);
    if (!graph_dump.empty()) {
      save_matrix_csv(graph->weights, graph_dump + "_weights.csv");
      save_matrix_csv(graph->prior_matrix, graph_dump + "_prior.csv");
    }
  }
  const TrainedModel model = fit(kind, x, full, graph ? &*graph : nullptr,
                                 flags.fit_config(), &scaling);
  save_model(model, out);
  std::cout << "fit " << to_string(kind) << ": " << model.diagnostics.iterations
            << " EM iterations, final objective "
            << format_g17(model.diagnostics.final_objective) << ", converged "
            << (model.diagnostics.converged ? "yes" : "no") << "\n"
            << "model written to " << out << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out, bool has_header,
                std::optional<int> label_column, const std::string& labels_path) {
  const TrainedModel model = load_model(model_path);
  const Dataset ds = load_csv(data_path, has_header, label_column);
  if (ds.num_features() != model.weights.size()) {
    throw std::runtime_error("data has " + std::to_string(ds.num_features()) +
                             " features but the model expects " +
                             std::to_string(model.weights.size()));
  }
  LabelMatrix labels;
  if (!labels_path.empty()) {
    labels = load_labels_csv(labels_path);
    if (labels.num_points() > ds.num_points()) {
      throw std::runtime_error("labels reference more points than the dataset has");
    }
  }
  std::ofstream of(out);
  if (!of) throw std::runtime_error("cannot write file: " + out);
  of << "point,p1,label\n";
  for (int i = 0; i < ds.num_points(); ++i) {
    std::vector<Observation> obs;
    if (i < labels.num_points()) obs = labels.labels_of(i);
    const double p1 = predict(model, ds.features.row(i).transpose(), obs);
    of << i << "," << format_g17(p1) << "," << (p1 >= 0.5 ? 1 : 0) << "\n";
  }
  std::cout << "wrote predictions for " << ds.num_points() << " points to " << out
            << "\n";
  return 0;
}

int cmd_experiment(const std::string& data_path, bool has_header, int label_column,
                   const std::string& out, const std::string& aggregate_out,
                   ExperimentConfig cfg, const FitFlags& flags) {
  const Dataset ds = load_csv(data_path, has_header, label_column);
  cfg.fit = flags.fit_config();
  cfg.eta = flags.eta;
  cfg.bandwidth = parse_bandwidth(flags.bandwidth);
  cfg.knn = flags.knn;
  cfg.standardize = !flags.no_standardize;
  const ExperimentResult result = run_experiment(ds, cfg);
  save_results_csv(result, out);
  save_aggregate_csv(result, aggregate_out);
  int failed = 0;
  for (const ResultRow& r : result.rows) {
    if (r.failed) {
      ++failed;
      std::cerr << "cell failed: method=" << r.method << " proportion="
                << format_g17(r.proportion) << " seed=" << r.seed << " fold="
                << r.fold << ": " << r.error << "\n";
    }
  }
  std::cout << "wrote " << result.rows.size() << " rows to " << out << " ("
            << failed << " failed cells) and aggregates to " << aggregate_out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Semi-supervised learning from multiple annotators with "
      "input-dependent noise"};
  app.require_subcommand(1);
  int rc = 0;

  // --- simulate ---------------------------------------------------------
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Cluster a dataset and synthesize annotator labels");
  sim_cmd->set_config("--config", "", "Read options from a key = value file");
  struct {
    std::string input, out, clusters_out;
    bool has_header = false;
    int label_column = -1;
    SimConfig cfg;
  } sim;
  sim_cmd->add_option("--input", sim.input, "Dataset CSV with a ground-truth column")
      ->required();
  sim_cmd->add_flag("--has-header", sim.has_header, "First CSV row names the columns");
  sim_cmd->add_option("--label-column", sim.label_column,
                      "Ground-truth column (negative counts from the end)")
      ->capture_default_str();
  sim_cmd->add_option("--labelers", sim.cfg.num_labelers, "Number of simulated labelers")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--error-rate", sim.cfg.error_rate,
                      "Off-cluster fraction each labeler flips")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_option("--seed", sim.cfg.seed, "RNG seed")->capture_default_str();
  sim_cmd->add_option("--restarts", sim.cfg.kmeans_restarts, "k-means restarts")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sim.out, "Output label CSV")->required();
  sim_cmd->add_option("--clusters-out", sim.clusters_out,
                      "Cluster sidecar CSV (default: <out>_clusters.csv)");
  sim_cmd->callback([&]() {
    rc = cmd_simulate(sim.input, sim.has_header, sim.label_column, sim.cfg,
                      sim.out, sim.clusters_out);
  });

  // --- train ------------------------------------------------------------
  auto* train_cmd =
      app.add_subcommand("train", "Fit a model to a dataset and its labels");
  train_cmd->set_config("--config", "", "Read options from a key = value file");
  struct {
    std::string model, data, labels, out, graph_dump;
    bool has_header = false;
    std::optional<int> label_column;
    FitFlags flags;
  } train_args;
  train_cmd->add_option("--model", train_args.model, "id, lgp or ml-original")
      ->required();
  train_cmd->add_option("--data", train_args.data, "Feature CSV")->required();
  train_cmd->add_option("--labels", train_args.labels, "Annotator label CSV")
      ->required();
  train_cmd->add_option("--out", train_args.out, "Output model file")->required();
  train_cmd->add_flag("--has-header", train_args.has_header,
                      "First CSV row names the columns");
  train_cmd->add_option("--label-column", train_args.label_column,
                        "Drop this column (a ground-truth column is never used "
                        "for training)");
  train_args.flags.attach(train_cmd, true);
  train_cmd->add_option("--graph-dump", train_args.graph_dump,
                        "Write <prefix>_weights.csv and <prefix>_prior.csv for "
                        "the graph (lgp only)");
  train_cmd->callback([&]() {
    rc = cmd_train(train_args.model, train_args.data, train_args.labels,
                   train_args.out, train_args.has_header, train_args.label_column,
                   train_args.flags, train_args.graph_dump);
  });

  // --- predict ----------------------------------------------------------
  auto* pred_cmd =
      app.add_subcommand("predict", "Score new points with a trained model");
  pred_cmd->set_config("--config", "", "Read options from a key = value file");
  struct {
    std::string model, data, out, labels;
    bool has_header = false;
    std::optional<int> label_column;
  } pred;
  pred_cmd->add_option("--model", pred.model, "Model file from train")->required();
  pred_cmd->add_option("--data", pred.data, "Feature CSV")->required();
  pred_cmd->add_option("--out", pred.out, "Output CSV (point,p1,label)")->required();
  pred_cmd->add_flag("--has-header", pred.has_header,
                     "First CSV row names the columns");
  pred_cmd->add_option("--label-column", pred.label_column,
                       "Drop this column before scoring");
  pred_cmd->add_option("--labels", pred.labels,
                       "Optional annotator label CSV to condition on");
  pred_cmd->callback([&]() {
    rc = cmd_predict(pred.model, pred.data, pred.out, pred.has_header,
                     pred.label_column, pred.labels);
  });

  // --- experiment -------------------------------------------------------
  auto* exp_cmd = app.add_subcommand(
      "experiment", "Cross-validated comparison of all methods");
  exp_cmd->set_config("--config", "", "Read options from a key = value file");
  struct {
    std::string data, out = "results.csv", aggregate_out = "aggregate.csv";
    bool has_header = false;
    int label_column = -1;
    ExperimentConfig cfg;
    FitFlags flags;
    double ridge = 1e-4;
  } exp;
  exp_cmd->add_option("--data", exp.data, "Dataset CSV with a ground-truth column")
      ->required();
  exp_cmd->add_flag("--has-header", exp.has_header,
                    "First CSV row names the columns");
  exp_cmd->add_option("--label-column", exp.label_column,
                      "Ground-truth column (negative counts from the end)")
      ->capture_default_str();
  exp_cmd->add_option("--out", exp.out, "Per-cell results CSV")->capture_default_str();
  exp_cmd->add_option("--aggregate-out", exp.aggregate_out, "Aggregate CSV")
      ->capture_default_str();
  exp_cmd->add_option("--methods", exp.cfg.methods,
                      "Methods to compare (annotator-lr expands per labeler)")
      ->delimiter(',')
      ->capture_default_str();
  exp_cmd->add_option("--proportions", exp.cfg.proportions,
                      "Labeled-point proportions of each training fold")
      ->delimiter(',')
      ->capture_default_str();
  exp_cmd->add_option("--folds", exp.cfg.folds, "Cross-validation folds")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000000));
  exp_cmd->add_option("--seeds", exp.cfg.seeds, "One full repetition per seed")
      ->delimiter(',')
      ->capture_default_str();
  exp_cmd->add_option("--labelers", exp.cfg.sim.num_labelers,
                      "Number of simulated labelers")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  exp_cmd->add_option("--error-rate", exp.cfg.sim.error_rate,
                      "Off-cluster fraction each labeler flips")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  exp_cmd->add_option("--restarts", exp.cfg.sim.kmeans_restarts, "k-means restarts")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  exp_cmd->add_option("--ridge", exp.ridge, "Ridge for the baseline classifiers")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  exp_cmd->add_option("--jobs", exp.cfg.jobs, "Seeds processed in parallel")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  exp.flags.attach(exp_cmd, true);
  exp_cmd->callback([&]() {
    exp.cfg.baseline_ridge = exp.ridge;
    rc = cmd_experiment(exp.data, exp.has_header, exp.label_column, exp.out,
                        exp.aggregate_out, exp.cfg, exp.flags);
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
