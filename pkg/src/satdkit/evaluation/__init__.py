"""Metrics, fold plans, the fit/predict pipeline, and experiment protocols."""

from .experiments import (
    ExperimentError,
    load_text_label_file,
    run_cross_project,
    run_cross_tracker,
    run_cross_validation,
    run_learning_curve,
    run_transfer_experiment,
)
from .folds import FoldPlan, stratified_kfold
from .metrics import (
    ConfusionCounts,
    EvalMetrics,
    compute_metrics,
    confusion_from_predictions,
    mean_metrics,
)
from .pipeline import (
    CLASSIFIERS,
    IMBALANCE_STRATEGIES,
    FoldOutcome,
    PipelineConfig,
    fit_and_predict,
    train_pipeline,
)
from .report import EvalReport, build_report, fingerprint_config

__all__ = [
    "CLASSIFIERS", "ConfusionCounts", "EvalMetrics", "EvalReport", "ExperimentError",
    "FoldOutcome", "FoldPlan", "IMBALANCE_STRATEGIES", "PipelineConfig", "build_report",
    "compute_metrics", "confusion_from_predictions", "fingerprint_config",
    "fit_and_predict", "load_text_label_file", "mean_metrics", "run_cross_project",
    "run_cross_tracker", "run_cross_validation", "run_learning_curve",
    "run_transfer_experiment", "stratified_kfold", "train_pipeline",
]
