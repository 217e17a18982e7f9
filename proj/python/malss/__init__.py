"""Semi-supervised learning from multiple annotators.

Thin package wrapper around the compiled extension; everything public
lives in ``malss._core``.
"""

from malss._core import (
    AggregateRow,
    AnnotatorParams,
    Dataset,
    ExperimentResult,
    FitDiagnostics,
    Fold,
    GraphPrior,
    LabelMatrix,
    Observation,
    ResultRow,
    ScalingParams,
    SimResult,
    TrainedModel,
    accuracy,
    annotator_sigma,
    apply_scaling,
    build_graph_prior,
    fit,
    load_csv,
    load_labels_csv,
    load_model,
    majority_vote,
    predict,
    predict_many,
    roc_auc,
    run_experiment,
    save_aggregate_csv,
    save_csv,
    save_labels_csv,
    save_model,
    save_results_csv,
    simulate_labelers,
    standardize,
    stratified_kfold,
)

__all__ = [
    "AggregateRow",
    "AnnotatorParams",
    "Dataset",
    "ExperimentResult",
    "FitDiagnostics",
    "Fold",
    "GraphPrior",
    "LabelMatrix",
    "Observation",
    "ResultRow",
    "ScalingParams",
    "SimResult",
    "TrainedModel",
    "accuracy",
    "annotator_sigma",
    "apply_scaling",
    "build_graph_prior",
    "fit",
    "load_csv",
    "load_labels_csv",
    "load_model",
    "majority_vote",
    "predict",
    "predict_many",
    "roc_auc",
    "run_experiment",
    "save_aggregate_csv",
    "save_csv",
    "save_labels_csv",
    "save_model",
    "save_results_csv",
    "simulate_labelers",
    "standardize",
    "stratified_kfold",
]
