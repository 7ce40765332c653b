"""Per-fold fit/predict pipeline: everything is fitted on the train split.

Vocabulary, embeddings, class weights, and augmentation are all derived from
the training split alone, so the fitted artifacts are a pure function of
(train split, config, seed) — the no-leakage property the harness audits.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..corpus.types import LabeledDataset
from ..imbalance import (
    EdaConfig,
    balance_with_eda,
    compute_class_weights,
    load_synonyms,
    oversample,
)
from ..model.baselines import keyword_baseline, load_keyword_phrases, random_baseline
from ..model.classical import CLASSICAL_KINDS, classical_fit, classical_predict, featurize_corpus
from ..model.textcnn import CnnConfig, TrainingData, cnn_init, cnn_predict, cnn_train
from ..preprocess.embeddings import init_random_embedding, load_embedding_file
from ..preprocess.subword import train_corpus_embedding
from ..preprocess.text import tokenize
from ..preprocess.vocab import build_vocabulary, encode_batch
from .folds import stratified_kfold

IMBALANCE_STRATEGIES = ("none", "weighted", "oversample", "eda")
CLASSIFIERS = ("cnn",) + CLASSICAL_KINDS + ("random", "keyword", "oracle")


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of one experiment, resolved and serializable."""

    classifier: str = "cnn"
    region_sizes: tuple[int, ...] = (1, 2, 3)
    feature_maps_per_size: int = 200
    embedding_dim: int = 300
    max_len: int = 256
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    embedding_trainable: bool = True
    embedding_source: str = "random"
    embedding_path: str | None = None
    embedding_epochs: int = 5
    embedding_buckets: int = 1 << 17
    min_count: int = 1
    imbalance: str = "none"
    eda_alpha: float = 0.1
    synonyms_path: str | None = None
    keywords_path: str | None = None
    early_stop: bool = True
    val_fraction: float = 0.1
    patience: int = 3
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "region_sizes", tuple(self.region_sizes))
        if self.classifier not in CLASSIFIERS:
            raise ValueError(
                f"unknown classifier {self.classifier!r}; expected one of {CLASSIFIERS}")
        if self.imbalance not in IMBALANCE_STRATEGIES:
            raise ValueError(
                f"unknown imbalance strategy {self.imbalance!r}; "
                f"expected one of {IMBALANCE_STRATEGIES}")
        if self.embedding_source not in ("random", "pretrained_general",
                                         "pretrained_se", "corpus_trained"):
            raise ValueError(f"unknown embedding source {self.embedding_source!r}")
        if self.embedding_source.startswith("pretrained") and not self.embedding_path:
            raise ValueError(f"embedding_source={self.embedding_source} needs embedding_path")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")

    def cnn_config(self, seed: int | None = None,
                   embedding_dim: int | None = None,
                   embedding_trainable: bool | None = None) -> CnnConfig:
        return CnnConfig(
            region_sizes=self.region_sizes,
            feature_maps_per_size=self.feature_maps_per_size,
            embedding_dim=self.embedding_dim if embedding_dim is None else embedding_dim,
            max_len=self.max_len,
            seed=self.seed if seed is None else seed,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            embedding_trainable=(self.embedding_trainable if embedding_trainable is None
                                 else embedding_trainable),
        )

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["region_sizes"] = list(self.region_sizes)
        return payload


@dataclass
class FoldOutcome:
    predicted: np.ndarray
    satd_probs: np.ndarray | None
    artifacts: dict[str, str] = field(default_factory=dict)


def _hash_array(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def _hash_text(items) -> str:
    digest = hashlib.sha256()
    for item in items:
        digest.update(repr(item).encode())
        digest.update(b"\x00")
    return digest.hexdigest()


def _balance_training_set(train: LabeledDataset, config: PipelineConfig,
                          seed: int) -> LabeledDataset:
    if config.imbalance == "oversample":
        return oversample(train, seed)
    if config.imbalance == "eda":
        n_pos = train.positive_count
        deficit = (len(train) - n_pos) - n_pos
        if deficit <= 0:
            return train
        synonyms = load_synonyms(config.synonyms_path) if config.synonyms_path \
            else _default_synonyms()
        cfg = EdaConfig(alpha=config.eda_alpha,
                        n_aug=math.ceil(deficit / n_pos),
                        seed=seed,
                        synonym_source=synonyms)
        return balance_with_eda(train, cfg)
    return train


def _default_synonyms() -> dict:
    from importlib import resources
    import json

    table = {}
    text = resources.files("satdkit.data").joinpath("synonyms.jsonl").read_text("utf-8")
    for line in text.splitlines():
        if line.strip():
            record = json.loads(line)
            table[record["token"]] = list(record["synonyms"])
    return table


def _build_embedding(config: PipelineConfig, vocab, corpus_tokens, seed: int):
    source = config.embedding_source
    if source == "random":
        return init_random_embedding(vocab, config.embedding_dim, seed)
    if source == "corpus_trained":
        return train_corpus_embedding(
            corpus_tokens, vocab, config.embedding_dim, seed,
            epochs=config.embedding_epochs, buckets=config.embedding_buckets)
    return load_embedding_file(config.embedding_path, vocab, seed=seed, source=source)


def _stratified_val_split(labels: np.ndarray, val_fraction: float, seed: int):
    """Indices (train, val) with the val share ≈ val_fraction, stratified."""
    k = max(2, round(1.0 / val_fraction))
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if min(n_pos, n_neg) < k:
        return np.arange(len(labels)), None
    plan = stratified_kfold(labels.astype(bool).tolist(), k, seed)
    val_idx = np.array(plan.test_indices(0), dtype=np.int64)
    train_idx = np.array(plan.train_indices(0), dtype=np.int64)
    return train_idx, val_idx


def _train_cnn_core(train_tokens, train_labels: np.ndarray, vocab,
                    config: PipelineConfig, seed: int):
    """Embedding build + weighted/early-stopped CNN training on encoded tokens."""
    artifacts: dict[str, str] = {}
    embedding = _build_embedding(config, vocab, train_tokens, seed)
    artifacts["embedding"] = _hash_array(embedding.vectors)
    weights = None
    if config.imbalance == "weighted":
        weights = compute_class_weights(train_labels.tolist())
        artifacts["class_weights"] = repr(tuple(weights.as_array()))

    cnn_cfg = config.cnn_config(seed=seed, embedding_dim=embedding.dim)
    model = cnn_init(cnn_cfg, embedding, vocab_hash=vocab.content_hash())

    indices, lengths = encode_batch(train_tokens, vocab, config.max_len)
    labels_int = train_labels.astype(np.int64)
    nonempty = lengths >= 1
    if not np.all(nonempty):
        indices, lengths, labels_int = (indices[nonempty], lengths[nonempty],
                                        labels_int[nonempty])
    val_data = None
    if config.early_stop:
        train_idx, val_idx = _stratified_val_split(labels_int, config.val_fraction, seed)
        if val_idx is not None:
            val_data = TrainingData(indices[val_idx], lengths[val_idx], labels_int[val_idx])
            indices, lengths, labels_int = (indices[train_idx], lengths[train_idx],
                                            labels_int[train_idx])
    data = TrainingData(indices, lengths, labels_int)
    model, _history = cnn_train(model, data, weights=weights,
                                val_data=val_data, patience=config.patience)
    artifacts["parameters"] = _hash_array(model.output_weights)
    return model, artifacts


def train_pipeline(train: LabeledDataset, config: PipelineConfig,
                   seed: int | None = None):
    """Train the configured CNN on the whole dataset; returns (model, vocab, artifacts)."""
    if config.classifier != "cnn":
        raise ValueError(
            f"train_pipeline supports the cnn classifier, got {config.classifier!r}")
    seed = config.seed if seed is None else seed
    balanced = _balance_training_set(train, config, seed)
    train_tokens = [tokenize(s.text) for s in balanced.sections]
    train_labels = np.array(balanced.bool_labels())
    vocab = build_vocabulary(train_tokens, min_count=config.min_count)
    artifacts = {"vocab": vocab.content_hash(), "train_size": str(len(balanced))}
    model, cnn_artifacts = _train_cnn_core(train_tokens, train_labels, vocab,
                                           config, seed)
    artifacts.update(cnn_artifacts)
    return model, vocab, artifacts


def fit_and_predict(train: LabeledDataset, test: LabeledDataset,
                    config: PipelineConfig, seed: int) -> FoldOutcome:
    """Fit preprocessing + model on the train split only; predict the test split."""
    if config.classifier == "oracle":
        return FoldOutcome(predicted=np.array(test.bool_labels()), satd_probs=None,
                           artifacts={"oracle": "true-labels"})
    if config.classifier == "random":
        predicted = random_baseline(train.bool_labels(), len(test), seed)
        return FoldOutcome(predicted=predicted, satd_probs=None,
                           artifacts={"positive_rate": repr(np.mean(train.bool_labels()))})
    if config.classifier == "keyword":
        phrases = load_keyword_phrases(config.keywords_path)
        predicted = np.array([keyword_baseline(tokenize(s.text), phrases)
                              for s in test.sections])
        return FoldOutcome(predicted=predicted, satd_probs=None,
                           artifacts={"phrases": _hash_text(phrases)})

    balanced = _balance_training_set(train, config, seed)
    train_tokens = [tokenize(s.text) for s in balanced.sections]
    train_labels = np.array(balanced.bool_labels())
    vocab = build_vocabulary(train_tokens, min_count=config.min_count)
    artifacts = {"vocab": vocab.content_hash(), "train_size": str(len(balanced))}

    test_tokens = [tokenize(s.text) for s in test.sections]

    if config.classifier in CLASSICAL_KINDS:
        features = featurize_corpus(train_tokens, vocab)
        model = classical_fit(config.classifier, features, train_labels, seed=seed)
        predicted = classical_predict(model, featurize_corpus(test_tokens, vocab))
        return FoldOutcome(predicted=predicted, satd_probs=None, artifacts=artifacts)

    model, cnn_artifacts = _train_cnn_core(train_tokens, train_labels, vocab,
                                           config, seed)
    artifacts.update(cnn_artifacts)

    test_indices, test_lengths = encode_batch(test_tokens, vocab, config.max_len)
    keep = test_lengths >= 1
    predicted = np.zeros(len(test), dtype=bool)
    satd_probs = np.zeros(len(test))
    if np.any(keep):
        test_data = TrainingData(test_indices[keep], test_lengths[keep],
                                 np.zeros(int(keep.sum()), dtype=np.int64))
        pred_kept, probs_kept = cnn_predict(model, test_data)
        predicted[keep] = pred_kept
        satd_probs[keep] = probs_kept
    return FoldOutcome(predicted=predicted, satd_probs=satd_probs, artifacts=artifacts)
