"""satdkit: self-admitted technical debt detection for issue trackers.

A library and CLI that fetches issues from Jira/Monorail-style trackers,
decomposes them into summary/description/comment sections, and classifies
each section as self-admitted technical debt (SATD) or not with a
convolutional text classifier — plus classical baselines, class-imbalance
handling, transfer-learning experiments, and n-gram keyword extraction that
traces pooled CNN features back to the exact token spans that fired them.

Numeric hot spots run as numba-compiled kernels when numba is importable;
set SATDKIT_DISABLE_NUMBA=1 to force the pure-numpy fallbacks
(``satdkit.kernels.BACKEND`` names the active one).
"""

__version__ = "0.1.0"

from .corpus import (
    IssueSection,
    LabeledDataset,
    SATDLabel,
    decompose_issue,
    fetch_issues,
    load_dataset,
    save_dataset,
    strip_code_blocks,
)
from .evaluation import (
    EvalMetrics,
    EvalReport,
    PipelineConfig,
    compute_metrics,
    fit_and_predict,
    run_cross_project,
    run_cross_tracker,
    run_cross_validation,
    run_learning_curve,
    run_transfer_experiment,
    stratified_kfold,
    train_pipeline,
)
from .imbalance import EdaConfig, balance_with_eda, compute_class_weights, oversample
from .kernels import BACKEND
from .keywords import (
    KeywordRecord,
    KeywordTable,
    aggregate_keywords,
    emit_overlap_plot_data,
    extract_section_keywords,
    keyword_overlap,
)
from .model import (
    CnnConfig,
    TextCnnModel,
    TransferPlan,
    cnn_init,
    cnn_predict,
    cnn_train,
    load_model,
    save_model,
)
from .preprocess import (
    EmbeddingMatrix,
    Vocabulary,
    build_vocabulary,
    encode,
    encode_batch,
    init_random_embedding,
    load_embedding_file,
    tokenize,
    train_corpus_embedding,
)

__all__ = [
    "BACKEND", "CnnConfig", "EdaConfig", "EmbeddingMatrix", "EvalMetrics",
    "EvalReport", "IssueSection", "KeywordRecord", "KeywordTable", "LabeledDataset",
    "PipelineConfig", "SATDLabel", "TextCnnModel", "TransferPlan", "Vocabulary",
    "__version__", "aggregate_keywords", "balance_with_eda", "build_vocabulary",
    "cnn_init", "cnn_predict", "cnn_train", "compute_class_weights",
    "compute_metrics", "decompose_issue", "emit_overlap_plot_data", "encode",
    "encode_batch", "extract_section_keywords", "fetch_issues", "fit_and_predict",
    "init_random_embedding", "keyword_overlap", "load_dataset",
    "load_embedding_file", "load_model", "oversample", "run_cross_project",
    "run_cross_tracker", "run_cross_validation", "run_learning_curve",
    "run_transfer_experiment", "save_dataset", "save_model", "stratified_kfold",
    "strip_code_blocks", "tokenize", "train_corpus_embedding", "train_pipeline",
]
