"""Multi-region-size convolutional text classifier over token embeddings.

Architecture: embedding lookup → per region size, convolution filters with a
rectifier → 1-max pooling over positions that lie entirely inside the true
(unpadded) token span → concatenation → affine layer → softmax.  Pooling is
masked to the true length, so padding never influences any output and
results are independent of max_len.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .. import kernels
from ..preprocess.embeddings import EmbeddingMatrix
from ..preprocess.vocab import EncodedSection, Vocabulary

POSITIVE_CLASS = 1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Child-stream tags so each layer draws from its own seeded stream; a layer
# reinitialized "fresh" then reproduces its from-scratch parameters exactly.
_CONV_STREAM = 0
_OUTPUT_STREAM = 1
_TRAIN_STREAM = 2

TRANSFER_SETTINGS = ("fresh", "fine_tune", "frozen")


class ConfigError(ValueError):
    """Invalid or inconsistent model configuration."""


class TrainingDivergenceError(RuntimeError):
    """Training loss became non-finite; message names the first bad batch."""


@dataclass(frozen=True)
class CnnConfig:
    region_sizes: tuple[int, ...] = (1, 2, 3)
    feature_maps_per_size: int = 200
    embedding_dim: int = 300
    max_len: int = 256
    num_classes: int = 2
    seed: int = 0
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    embedding_trainable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "region_sizes", tuple(self.region_sizes))
        if not self.region_sizes or any(r < 1 for r in self.region_sizes):
            raise ConfigError("region_sizes must be positive integers")
        if any(r > self.max_len for r in self.region_sizes):
            raise ConfigError(
                f"every region size must be <= max_len={self.max_len}, "
                f"got {self.region_sizes}")
        if len(set(self.region_sizes)) != len(self.region_sizes):
            raise ConfigError("region_sizes must be distinct")
        for name in ("feature_maps_per_size", "embedding_dim", "max_len",
                     "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.num_classes != 2:
            raise ConfigError("only binary classification is supported")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")

    @property
    def total_feature_maps(self) -> int:
        return len(self.region_sizes) * self.feature_maps_per_size


def default_config(**overrides) -> CnnConfig:
    """Baseline architecture: regions (3, 4, 5), 100 maps per size."""
    base = dict(region_sizes=(3, 4, 5), feature_maps_per_size=100, embedding_dim=300)
    base.update(overrides)
    return CnnConfig(**base)


def tuned_config(**overrides) -> CnnConfig:
    """Best-performing architecture: regions (1, 2, 3), 200 maps per size."""
    base = dict(region_sizes=(1, 2, 3), feature_maps_per_size=200, embedding_dim=300)
    base.update(overrides)
    return CnnConfig(**base)


class TrainingData(NamedTuple):
    """Encoded sections ready for the training loop."""

    indices: np.ndarray  # (N, max_len) int64
    lengths: np.ndarray  # (N,) int64
    labels: np.ndarray   # (N,) int64 in {0, 1}


@dataclass
class ActivationsRecord:
    """Per-feature-map diagnostics captured for keyword backtracking."""

    pooled: np.ndarray            # (total_maps,) post-rectifier pooled values
    argmax: np.ndarray            # (total_maps,) winning position, -1 if none
    region_sizes: np.ndarray      # (total_maps,) region size of each map
    valid_positions: np.ndarray   # (total_maps,) L - r + 1, floored at 0


@dataclass
class TextCnnModel:
    config: CnnConfig
    embedding: np.ndarray                 # (vocab_size, dim) float64, row 0 zeros
    embedding_source: str
    conv_weights: dict[int, np.ndarray]   # region size -> (r*dim, maps) float64
    conv_biases: dict[int, np.ndarray]    # region size -> (maps,) float64
    output_weights: np.ndarray            # (total_maps, num_classes)
    output_bias: np.ndarray               # (num_classes,)
    conv_trainable: bool = True
    output_trainable: bool = True
    vocab_hash: str = ""
    trained: bool = field(default=False, compare=False)

    @property
    def total_feature_maps(self) -> int:
        return self.config.total_feature_maps

    def feature_layout(self) -> list[tuple[int, int, int]]:
        """(region_size, start, end) column spans of the concatenated vector."""
        spans = []
        start = 0
        for r in self.config.region_sizes:
            end = start + self.config.feature_maps_per_size
            spans.append((r, start, end))
            start = end
        return spans

    def feature_region_sizes(self) -> np.ndarray:
        return np.repeat(np.array(self.config.region_sizes, dtype=np.int64),
                         self.config.feature_maps_per_size)

    def parameters(self) -> dict[str, np.ndarray]:
        params = {"output_weights": self.output_weights, "output_bias": self.output_bias}
        for r in self.config.region_sizes:
            params[f"conv_weights_{r}"] = self.conv_weights[r]
            params[f"conv_biases_{r}"] = self.conv_biases[r]
        if self.config.embedding_trainable:
            params["embedding"] = self.embedding
        return params

    def snapshot(self) -> dict[str, np.ndarray]:
        """Deep copy of conv and output parameters, for transfer plans."""
        return {
            "conv_weights": {r: w.copy() for r, w in self.conv_weights.items()},
            "conv_biases": {r: b.copy() for r, b in self.conv_biases.items()},
            "output_weights": self.output_weights.copy(),
            "output_bias": self.output_bias.copy(),
        }


def _draw_conv(cfg: CnnConfig, rng) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    weights, biases = {}, {}
    for r in cfg.region_sizes:
        fan_in = r * cfg.embedding_dim
        bound = np.sqrt(6.0 / fan_in)
        weights[r] = np.ascontiguousarray(
            rng.uniform(-bound, bound, size=(fan_in, cfg.feature_maps_per_size)))
        biases[r] = np.zeros(cfg.feature_maps_per_size)
    return weights, biases


def _draw_output(cfg: CnnConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    fan_in = cfg.total_feature_maps
    bound = np.sqrt(6.0 / fan_in)
    return (rng.uniform(-bound, bound, size=(fan_in, cfg.num_classes)),
            np.zeros(cfg.num_classes))


def cnn_init(cfg: CnnConfig, embedding: EmbeddingMatrix, vocab_hash: str = "") -> TextCnnModel:
    """Seeded fan-in-scaled symmetric-uniform initialization of all layers."""
    if embedding.dim != cfg.embedding_dim:
        raise ConfigError(
            f"embedding dim {embedding.dim} != configured embedding_dim {cfg.embedding_dim}")
    conv_w, conv_b = _draw_conv(cfg, np.random.default_rng([cfg.seed, _CONV_STREAM]))
    out_w, out_b = _draw_output(cfg, np.random.default_rng([cfg.seed, _OUTPUT_STREAM]))
    return TextCnnModel(
        config=cfg,
        embedding=np.array(embedding.vectors, dtype=np.float64, copy=True),
        embedding_source=embedding.source,
        conv_weights=conv_w,
        conv_biases=conv_b,
        output_weights=out_w,
        output_bias=out_b,
        vocab_hash=vocab_hash,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _forward_batch(model: TextCnnModel, indices: np.ndarray, lengths: np.ndarray):
    """Shared forward pass; slices to the batch's longest true length so
    padded columns beyond it are never even looked up."""
    if np.any(lengths < 1):
        raise ValueError("empty section")
    t_max = int(lengths.max())
    idx = np.ascontiguousarray(indices[:, :t_max])
    x = model.embedding[idx]
    pooled_parts, argmax_parts = [], []
    for r in model.config.region_sizes:
        pooled_r, argmax_r = kernels.conv_pool_forward(
            x, lengths, model.conv_weights[r], model.conv_biases[r])
        pooled_parts.append(pooled_r)
        argmax_parts.append(argmax_r)
    pooled = np.concatenate(pooled_parts, axis=1)
    argmax = np.concatenate(argmax_parts, axis=1)
    logits = pooled @ model.output_weights + model.output_bias
    probs = _softmax(logits)
    return {"x": x, "idx": idx, "pooled": pooled, "argmax": argmax,
            "probs": probs, "t_max": t_max}


def cnn_forward(model: TextCnnModel, encoded: EncodedSection,
                capture_activations: bool = False):
    """Class probabilities for one section; optionally the pooled diagnostics."""
    indices = np.array([encoded.indices], dtype=np.int64)
    lengths = np.array([encoded.true_length], dtype=np.int64)
    state = _forward_batch(model, indices, lengths)
    probs = state["probs"][0]
    if not capture_activations:
        return probs
    region_sizes = model.feature_region_sizes()
    record = ActivationsRecord(
        pooled=state["pooled"][0].copy(),
        argmax=state["argmax"][0].copy(),
        region_sizes=region_sizes,
        valid_positions=np.maximum(encoded.true_length - region_sizes + 1, 0),
    )
    return probs, record


def cnn_predict(model: TextCnnModel, encoded_sections, batch_size: int = 256):
    """Labels (tie broken toward the negative class) and positive-class
    probabilities for a list of encoded sections."""
    if isinstance(encoded_sections, TrainingData):
        indices, lengths = encoded_sections.indices, encoded_sections.lengths
    else:
        encoded_sections = list(encoded_sections)
        if not encoded_sections:
            return np.zeros(0, dtype=bool), np.zeros(0)
        indices = np.array([e.indices for e in encoded_sections], dtype=np.int64)
        lengths = np.array([e.true_length for e in encoded_sections], dtype=np.int64)
    labels = np.zeros(len(indices), dtype=bool)
    satd_probs = np.zeros(len(indices))
    for start in range(0, len(indices), batch_size):
        stop = start + batch_size
        probs = _forward_batch(model, indices[start:stop], lengths[start:stop])["probs"]
        satd_probs[start:stop] = probs[:, POSITIVE_CLASS]
        labels[start:stop] = probs[:, POSITIVE_CLASS] > probs[:, 1 - POSITIVE_CLASS]
    return labels, satd_probs


def _loss_and_grads(model: TextCnnModel, indices, lengths, labels, weight_vector):
    """Mean weighted cross-entropy and gradients for every trainable tensor."""
    state = _forward_batch(model, indices, lengths)
    probs, pooled, argmax, x = state["probs"], state["pooled"], state["argmax"], state["x"]
    n = len(labels)
    rows = np.arange(n)
    w = weight_vector[labels] if weight_vector is not None else np.ones(n)
    eps = 1e-12
    loss = float(np.mean(w * -np.log(probs[rows, labels] + eps)))

    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    dlogits *= (w / n)[:, None]

    grads: dict[str, np.ndarray] = {}
    if model.output_trainable:
        grads["output_weights"] = pooled.T @ dlogits
        grads["output_bias"] = dlogits.sum(axis=0)
    dpooled = dlogits @ model.output_weights.T

    need_conv = model.conv_trainable
    need_embed = model.config.embedding_trainable
    if need_conv or need_embed:
        grad_x = np.zeros_like(x)
        for region, start, end in model.feature_layout():
            gw, gb, gx = kernels.conv_pool_backward(
                np.ascontiguousarray(dpooled[:, start:end]),
                np.ascontiguousarray(pooled[:, start:end]),
                np.ascontiguousarray(argmax[:, start:end]),
                x, model.conv_weights[region], region)
            if need_conv:
                maps = model.config.feature_maps_per_size
                grads[f"conv_weights_{region}"] = np.ascontiguousarray(
                    gw.reshape(maps, region * model.config.embedding_dim).T)
                grads[f"conv_biases_{region}"] = gb
            if need_embed:
                grad_x += gx
        if need_embed:
            grads["embedding"] = kernels.embedding_grad(
                grad_x, state["idx"], model.embedding.shape[0])
    return loss, grads


class _AdamState:
    def __init__(self, lr: float):
        self.lr = lr
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        for name, grad in grads.items():
            tensor = tensors[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor)
                self.v[name] = np.zeros_like(tensor)
            kernels.adam_step(tensor, grad, self.m[name], self.v[name],
                              self.lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, self.t)


def _binary_f1(true_pos: np.ndarray, pred_pos: np.ndarray) -> float:
    tp = int(np.sum(true_pos & pred_pos))
    fp = int(np.sum(~true_pos & pred_pos))
    fn = int(np.sum(true_pos & ~pred_pos))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def cnn_train(model: TextCnnModel, data: TrainingData, weights=None,
              val_data: TrainingData | None = None, patience: int = 3):
    """Seeded mini-batch training with an adaptive per-parameter step.

    ``weights`` (a ClassWeights or None) scales each example's cross-entropy
    by its class weight; uniform weights reproduce the unweighted objective
    exactly.  With ``val_data``, training stops once the positive-class F1
    has not improved for ``patience`` epochs and the best parameters are
    restored.  Returns (model, per-epoch mean loss history).
    """
    cfg = model.config
    n = len(data.labels)
    if n == 0:
        raise ValueError("training data is empty")
    weight_vector = weights.as_array() if weights is not None else None
    rng = np.random.default_rng([cfg.seed, _TRAIN_STREAM])
    adam = _AdamState(cfg.learning_rate)
    tensors = model.parameters()

    history: list[float] = []
    best_f1 = -1.0
    best_params = None
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            loss, grads = _loss_and_grads(
                model, data.indices[batch], data.lengths[batch],
                data.labels[batch], weight_vector)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(
                    f"loss became non-finite at epoch {epoch} batch {batch_no}")
            adam.step(tensors, grads)
            epoch_loss += loss * len(batch)
        history.append(epoch_loss / n)

        if val_data is not None:
            pred, _ = cnn_predict(model, val_data)
            f1 = _binary_f1(val_data.labels.astype(bool), pred)
            if f1 > best_f1:
                best_f1 = f1
                best_params = {k: v.copy() for k, v in tensors.items()}
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= patience:
                    break
    if val_data is not None and best_params is not None:
        for name, value in best_params.items():
            tensors[name][...] = value
    model.trained = True
    return model, history


@dataclass(frozen=True)
class TransferPlan:
    """Per-layer policy when starting from a source-trained model."""

    conv_setting: str
    output_setting: str
    source_params: dict | None = None

    def __post_init__(self):
        for name, setting in (("conv_setting", self.conv_setting),
                              ("output_setting", self.output_setting)):
            if setting not in TRANSFER_SETTINGS:
                raise ConfigError(
                    f"{name} must be one of {TRANSFER_SETTINGS}, got {setting!r}")
        if (self.conv_setting != "fresh" or self.output_setting != "fresh") \
                and self.source_params is None:
            raise ConfigError("fine_tune/frozen settings require source_params")

    def tag(self) -> str:
        marks = {"fresh": "fresh", "fine_tune": "tune", "frozen": "freeze"}
        return f"conv={marks[self.conv_setting]},output={marks[self.output_setting]}"


def _check_shape(name: str, got: np.ndarray, want: np.ndarray):
    if got.shape != want.shape:
        raise ConfigError(f"{name}: source shape {got.shape} != target shape {want.shape}")


def apply_transfer_plan(model: TextCnnModel, plan: TransferPlan) -> TextCnnModel:
    """Set conv/output layers per plan; the embedding layer is untouched.

    fresh → reinitialized from the layer's own seeded stream (so a fully
    fresh plan reproduces from-scratch initialization exactly) and trainable;
    fine_tune → copied from source and trainable; frozen → copied and
    excluded from updates.
    """
    cfg = model.config
    out = replace(model)
    out.embedding = model.embedding.copy()

    if plan.conv_setting == "fresh":
        out.conv_weights, out.conv_biases = _draw_conv(
            cfg, np.random.default_rng([cfg.seed, _CONV_STREAM]))
        out.conv_trainable = True
    else:
        src_w = plan.source_params["conv_weights"]
        src_b = plan.source_params["conv_biases"]
        for r in cfg.region_sizes:
            if r not in src_w:
                raise ConfigError(f"conv r={r} weights missing from source parameters")
            _check_shape(f"conv r={r} weights", src_w[r], model.conv_weights[r])
            _check_shape(f"conv r={r} biases", src_b[r], model.conv_biases[r])
        out.conv_weights = {r: src_w[r].copy() for r in cfg.region_sizes}
        out.conv_biases = {r: src_b[r].copy() for r in cfg.region_sizes}
        out.conv_trainable = plan.conv_setting == "fine_tune"

    if plan.output_setting == "fresh":
        out.output_weights, out.output_bias = _draw_output(
            cfg, np.random.default_rng([cfg.seed, _OUTPUT_STREAM]))
        out.output_trainable = True
    else:
        _check_shape("output weights", plan.source_params["output_weights"],
                     model.output_weights)
        _check_shape("output bias", plan.source_params["output_bias"], model.output_bias)
        out.output_weights = plan.source_params["output_weights"].copy()
        out.output_bias = plan.source_params["output_bias"].copy()
        out.output_trainable = plan.output_setting == "fine_tune"

    out.trained = False
    return out


def save_model(model: TextCnnModel, path, vocab: Vocabulary | None = None) -> None:
    """Self-describing checkpoint: config, parameters, and (optionally) the
    vocabulary so prediction can encode raw text with nothing else on disk."""
    path = Path(path)
    arrays = {
        "config_json": np.array(json.dumps({
            "region_sizes": list(model.config.region_sizes),
            "feature_maps_per_size": model.config.feature_maps_per_size,
            "embedding_dim": model.config.embedding_dim,
            "max_len": model.config.max_len,
            "num_classes": model.config.num_classes,
            "seed": model.config.seed,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "learning_rate": model.config.learning_rate,
            "embedding_trainable": model.config.embedding_trainable,
        })),
        "embedding": model.embedding,
        "embedding_source": np.array(model.embedding_source),
        "output_weights": model.output_weights,
        "output_bias": model.output_bias,
        "flags": np.array([model.conv_trainable, model.output_trainable, model.trained]),
        "vocab_hash": np.array(model.vocab_hash),
    }
    for r in model.config.region_sizes:
        arrays[f"conv_weights_{r}"] = model.conv_weights[r]
        arrays[f"conv_biases_{r}"] = model.conv_biases[r]
    if vocab is not None:
        arrays["vocab_tokens"] = np.array(vocab.tokens_by_index())
        arrays["vocab_counts"] = np.array(
            [vocab.counts.get(t, 0) for t in vocab.tokens_by_index()], dtype=np.int64)
        arrays["vocab_min_count"] = np.array(vocab.min_count)
    with path.open("wb") as fh:  # keep the caller's extension (no implicit .npz)
        np.savez(fh, **arrays)


def load_model(path) -> tuple[TextCnnModel, Vocabulary | None]:
    path = Path(path)
    with np.load(path, allow_pickle=False) as data:
        cfg_raw = json.loads(str(data["config_json"]))
        cfg = CnnConfig(
            region_sizes=tuple(cfg_raw["region_sizes"]),
            feature_maps_per_size=cfg_raw["feature_maps_per_size"],
            embedding_dim=cfg_raw["embedding_dim"],
            max_len=cfg_raw["max_len"],
            num_classes=cfg_raw["num_classes"],
            seed=cfg_raw["seed"],
            epochs=cfg_raw["epochs"],
            batch_size=cfg_raw["batch_size"],
            learning_rate=cfg_raw["learning_rate"],
            embedding_trainable=cfg_raw["embedding_trainable"],
        )
        flags = data["flags"]
        model = TextCnnModel(
            config=cfg,
            embedding=data["embedding"],
            embedding_source=str(data["embedding_source"]),
            conv_weights={r: data[f"conv_weights_{r}"] for r in cfg.region_sizes},
            conv_biases={r: data[f"conv_biases_{r}"] for r in cfg.region_sizes},
            output_weights=data["output_weights"],
            output_bias=data["output_bias"],
            conv_trainable=bool(flags[0]),
            output_trainable=bool(flags[1]),
            vocab_hash=str(data["vocab_hash"]),
            trained=bool(flags[2]),
        )
        vocab = None
        if "vocab_tokens" in data:
            tokens = [str(t) for t in data["vocab_tokens"]]
            counts = data["vocab_counts"].tolist()
            vocab = Vocabulary(
                token_to_index={t: i + 2 for i, t in enumerate(tokens)},
                min_count=int(data["vocab_min_count"]),
                counts=dict(zip(tokens, counts)),
            )
    return model, vocab
