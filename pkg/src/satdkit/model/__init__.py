"""Models: the convolutional text classifier, classical classifiers, baselines."""

from .baselines import keyword_baseline, load_keyword_phrases, random_baseline
from .classical import (
    CLASSICAL_KINDS,
    ClassicalModel,
    MultinomialNaiveBayes,
    classical_fit,
    classical_predict,
    featurize_bow,
    featurize_corpus,
)
from .textcnn import (
    ActivationsRecord,
    CnnConfig,
    ConfigError,
    TextCnnModel,
    TrainingData,
    TrainingDivergenceError,
    TransferPlan,
    apply_transfer_plan,
    cnn_forward,
    cnn_init,
    cnn_predict,
    cnn_train,
    default_config,
    load_model,
    save_model,
    tuned_config,
)

__all__ = [
    "ActivationsRecord", "CLASSICAL_KINDS", "ClassicalModel", "CnnConfig", "ConfigError",
    "MultinomialNaiveBayes", "TextCnnModel", "TrainingData", "TrainingDivergenceError",
    "TransferPlan", "apply_transfer_plan", "classical_fit", "classical_predict",
    "cnn_forward", "cnn_init", "cnn_predict", "cnn_train", "default_config",
    "featurize_bow", "featurize_corpus", "keyword_baseline", "load_keyword_phrases",
    "load_model", "random_baseline", "save_model", "tuned_config",
]
