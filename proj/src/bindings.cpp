// Python bindings for the main operations: data loading, labeler
// simulation, graph construction, EM fitting, prediction and the
// evaluation harness. Eigen types cross as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "malss/eval.hpp"

namespace py = pybind11;
using namespace malss;

namespace {

LabelMatrix label_matrix_from_dense(const Eigen::MatrixXi& dense) {
  LabelMatrix labels(static_cast<int>(dense.rows()),
                     static_cast<int>(dense.cols()));
  for (int i = 0; i < dense.rows(); ++i) {
    for (int t = 0; t < dense.cols(); ++t) {
      if (dense(i, t) >= 0) labels.set(i, t, dense(i, t));
    }
  }
  return labels;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "semi-supervised learning from multiple annotators";

  // ---- data ------------------------------------------------------------

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](Matrix features, std::optional<std::vector<int>> gt) {
             Dataset ds;
             ds.features = std::move(features);
             ds.ground_truth = std::move(gt);
             return ds;
           }),
           py::arg("features"), py::arg("ground_truth") = std::nullopt)
      .def_readwrite("features", &Dataset::features)
      .def_readwrite("ground_truth", &Dataset::ground_truth)
      .def_readwrite("feature_names", &Dataset::feature_names)
      .def_property_readonly("num_points", &Dataset::num_points)
      .def_property_readonly("num_features", &Dataset::num_features);

  py::class_<ScalingParams>(m, "ScalingParams")
      .def_readonly("mean", &ScalingParams::mean)
      .def_readonly("stdev", &ScalingParams::stdev)
      .def_static("identity", &ScalingParams::identity, py::arg("num_features"));

  py::class_<Observation>(m, "Observation")
      .def_readonly("annotator", &Observation::annotator)
      .def_readonly("label", &Observation::label)
      .def("__repr__", [](const Observation& o) {
        return "Observation(annotator=" + std::to_string(o.annotator) +
               ", label=" + std::to_string(o.label) + ")";
      });

  py::class_<LabelMatrix>(m, "LabelMatrix")
      .def(py::init<int, int>(), py::arg("num_points"), py::arg("num_annotators"))
      .def_static("from_dense", &label_matrix_from_dense, py::arg("dense"),
                  "Build from a points x annotators int matrix; negative "
                  "entries mean unlabeled.")
      .def("set", &LabelMatrix::set, py::arg("point"), py::arg("annotator"),
           py::arg("label"))
      .def("labels_of", &LabelMatrix::labels_of, py::arg("point"))
      .def_property_readonly("num_points", &LabelMatrix::num_points)
      .def_property_readonly("num_annotators", &LabelMatrix::num_annotators)
      .def_property_readonly("total_labels", &LabelMatrix::total_labels);

  m.def("load_csv", &load_csv, py::arg("path"), py::arg("has_header"),
        py::arg("label_column") = std::nullopt);
  m.def("save_csv", &save_csv, py::arg("dataset"), py::arg("path"));
  m.def("save_labels_csv", &save_labels_csv, py::arg("labels"), py::arg("path"));
  m.def("load_labels_csv", &load_labels_csv, py::arg("path"));
  m.def("standardize", &standardize, py::arg("dataset"));
  m.def("apply_scaling", &apply_scaling, py::arg("features"), py::arg("scaling"));

  py::class_<Fold>(m, "Fold")
      .def_readonly("train", &Fold::train)
      .def_readonly("test", &Fold::test);

  m.def(
      "stratified_kfold",
      [](const Dataset& ds, int folds, std::uint64_t seed) {
        return stratified_kfold(ds, folds, seed);
      },
      py::arg("dataset"), py::arg("folds"), py::arg("seed") = 0);

  // ---- graph prior -------------------------------------------------------

  py::class_<GraphPrior>(m, "GraphPrior")
      .def_readonly("weights", &GraphPrior::weights)
      .def_readonly("laplacian", &GraphPrior::laplacian)
      .def_readonly("prior_matrix", &GraphPrior::prior_matrix)
      .def_readonly("bandwidth", &GraphPrior::bandwidth)
      .def_readonly("eta", &GraphPrior::eta);

  m.def("build_graph_prior", &build_graph_prior, py::arg("x"),
        py::arg("bandwidth") = std::nullopt, py::arg("knn") = std::nullopt,
        py::arg("eta") = 1.0);

  // ---- simulated labelers ------------------------------------------------

  py::class_<SimResult>(m, "SimResult")
      .def_readonly("labels", &SimResult::labels)
      .def_readonly("assignments", &SimResult::assignments)
      .def_readonly("flips", &SimResult::flips)
      .def_readonly("off_cluster", &SimResult::off_cluster);

  m.def(
      "simulate_labelers",
      [](const Dataset& ds, int num_labelers, double error_rate,
         std::uint64_t seed, int kmeans_restarts) {
        SimConfig config;
        config.num_labelers = num_labelers;
        config.error_rate = error_rate;
        config.seed = seed;
        config.kmeans_restarts = kmeans_restarts;
        return simulate_labelers(ds, config);
      },
      py::arg("dataset"), py::arg("num_labelers") = 5,
      py::arg("error_rate") = 0.35, py::arg("seed") = 0,
      py::arg("kmeans_restarts") = 10);

  // ---- models --------------------------------------------------------

  py::class_<AnnotatorParams>(m, "AnnotatorParams")
      .def_readonly("w", &AnnotatorParams::w)
      .def_readonly("gamma", &AnnotatorParams::gamma);

  py::class_<FitDiagnostics>(m, "FitDiagnostics")
      .def_readonly("iterations", &FitDiagnostics::iterations)
      .def_readonly("converged", &FitDiagnostics::converged)
      .def_readonly("final_objective", &FitDiagnostics::final_objective)
      .def_readonly("objective_history", &FitDiagnostics::objective_history);

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_property_readonly(
          "kind", [](const TrainedModel& model) { return to_string(model.kind); })
      .def_readonly("weights", &TrainedModel::weights)
      .def_readonly("bias", &TrainedModel::bias)
      .def_readonly("annotators", &TrainedModel::annotators)
      .def_property_readonly(
          "posterior",
          [](const TrainedModel& model) { return model.posterior.p1; })
      .def_readonly("scaling", &TrainedModel::scaling)
      .def_readonly("eta", &TrainedModel::eta)
      .def_readonly("bandwidth", &TrainedModel::bandwidth)
      .def_readonly("sigma_min", &TrainedModel::sigma_min)
      .def_readonly("diagnostics", &TrainedModel::diagnostics);

  m.def(
      "fit",
      [](const std::string& kind, const Matrix& x, const LabelMatrix& labels,
         const GraphPrior* graph, const ScalingParams* scaling, double epsilon,
         int max_em_iterations, double sigma_min, double annotator_ridge) {
        FitConfig config;
        config.epsilon = epsilon;
        config.max_em_iterations = max_em_iterations;
        config.sigma_min = sigma_min;
        config.annotator_ridge = annotator_ridge;
        return fit(model_kind_from_string(kind), x, labels, graph, config,
                   scaling);
      },
      py::arg("kind"), py::arg("x"), py::arg("labels"),
      py::arg("graph") = nullptr, py::arg("scaling") = nullptr,
      py::arg("epsilon") = 1e-6, py::arg("max_em_iterations") = 200,
      py::arg("sigma_min") = kDefaultSigmaMin, py::arg("annotator_ridge") = 0.0,
      "EM fit of one model family ('id', 'lgp' or 'ml-original'); `x` must "
      "already be standardized when `scaling` is passed.");

  m.def("predict", &predict, py::arg("model"), py::arg("x_raw"),
        py::arg("labels") = std::vector<Observation>{},
        "p(z=1 | x, labels) for one unscaled point.");
  m.def(
      "predict_many",
      [](const TrainedModel& model, const Matrix& x_raw) {
        Vector p(x_raw.rows());
        for (int i = 0; i < x_raw.rows(); ++i) {
          p[i] = predict(model, x_raw.row(i));
        }
        return p;
      },
      py::arg("model"), py::arg("x_raw"),
      "Classifier-prior predictions for every row of an unscaled matrix.");
  m.def(
      "annotator_sigma",
      [](const TrainedModel& model, int annotator, const Vector& x_scaled) {
        if (annotator < 0 ||
            annotator >= static_cast<int>(model.annotators.size())) {
          throw std::out_of_range("annotator_sigma: no annotator " +
                                  std::to_string(annotator));
        }
        return sigma(model.annotators[annotator], x_scaled, model.sigma_min);
      },
      py::arg("model"), py::arg("annotator"), py::arg("x_scaled"),
      "Fitted noise level of one annotator at a standardized point.");

  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  // ---- evaluation ------------------------------------------------------

  m.def("majority_vote", &majority_vote, py::arg("labels"));
  m.def("accuracy", &accuracy, py::arg("pred"), py::arg("truth"));
  m.def(
      "roc_auc",
      [](const Vector& scores, const std::vector<int>& truth) {
        return roc_auc(scores, truth).auc;
      },
      py::arg("scores"), py::arg("truth"));

  py::class_<ResultRow>(m, "ResultRow")
      .def_readonly("method", &ResultRow::method)
      .def_readonly("proportion", &ResultRow::proportion)
      .def_readonly("seed", &ResultRow::seed)
      .def_readonly("fold", &ResultRow::fold)
      .def_readonly("accuracy", &ResultRow::accuracy)
      .def_readonly("auc", &ResultRow::auc)
      .def_readonly("converged", &ResultRow::converged)
      .def_readonly("iterations", &ResultRow::iterations)
      .def_readonly("failed", &ResultRow::failed)
      .def_readonly("error", &ResultRow::error);

  py::class_<AggregateRow>(m, "AggregateRow")
      .def_readonly("method", &AggregateRow::method)
      .def_readonly("proportion", &AggregateRow::proportion)
      .def_readonly("count", &AggregateRow::count)
      .def_readonly("accuracy_mean", &AggregateRow::accuracy_mean)
      .def_readonly("accuracy_std", &AggregateRow::accuracy_std)
      .def_readonly("auc_mean", &AggregateRow::auc_mean)
      .def_readonly("auc_std", &AggregateRow::auc_std);

  py::class_<ExperimentResult>(m, "ExperimentResult")
      .def_readonly("rows", &ExperimentResult::rows)
      .def("aggregates", &ExperimentResult::aggregates);

  m.def(
      "run_experiment",
      [](const Dataset& ds, std::vector<std::string> methods,
         std::vector<double> proportions, int folds,
         std::vector<std::uint64_t> seeds, int num_labelers, double error_rate,
         double eta, std::optional<double> bandwidth, std::optional<int> knn,
         int jobs) {
        ExperimentConfig config;
        config.methods = std::move(methods);
        config.proportions = std::move(proportions);
        config.folds = folds;
        config.seeds = std::move(seeds);
        config.sim.num_labelers = num_labelers;
        config.sim.error_rate = error_rate;
        config.eta = eta;
        config.bandwidth = bandwidth;
        config.knn = knn;
        config.jobs = jobs;
        return run_experiment(ds, config);
      },
      py::arg("dataset"),
      py::arg("methods") =
          std::vector<std::string>{"lgp", "id", "ml-original",
                                   "majority-vote-lr", "annotator-lr"},
      py::arg("proportions") = std::vector<double>{0.2, 0.5, 0.8, 1.0},
      py::arg("folds") = 5,
      py::arg("seeds") = std::vector<std::uint64_t>{1, 2, 3, 4, 5},
      py::arg("num_labelers") = 5, py::arg("error_rate") = 0.35,
      py::arg("eta") = 1.0, py::arg("bandwidth") = std::nullopt,
      py::arg("knn") = std::nullopt, py::arg("jobs") = 1,
      "Cross-validated benchmark over simulated labelers; returns per-cell "
      "rows plus aggregate accessors.");
  m.def("save_results_csv", &save_results_csv, py::arg("result"),
        py::arg("path"));
  m.def("save_aggregate_csv", &save_aggregate_csv, py::arg("result"),
        py::arg("path"));
}
