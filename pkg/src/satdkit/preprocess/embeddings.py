"""Embedding matrices: random init, word-vector file I/O, persistence."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .vocab import PAD_INDEX, Vocabulary

EMBEDDING_SOURCES = ("random", "pretrained_general", "pretrained_se", "corpus_trained")
RANDOM_INIT_BOUND = 0.25


class EmbeddingFormatError(ValueError):
    """A word-vector text file is malformed; message names the line."""


@dataclass
class EmbeddingMatrix:
    """Dense token-index → vector lookup table.

    Row 0 (padding) is all zeros so padded positions contribute nothing;
    every other row must be finite.
    """

    vectors: np.ndarray
    dim: int
    source: str

    def __post_init__(self):
        if self.source not in EMBEDDING_SOURCES:
            raise ValueError(
                f"unknown embedding source {self.source!r}; expected one of {EMBEDDING_SOURCES}")
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise ValueError(
                f"vectors shape {self.vectors.shape} inconsistent with dim {self.dim}")
        if np.any(self.vectors[PAD_INDEX] != 0.0):
            raise ValueError("padding row (index 0) must be all zeros")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding vectors must be finite")

    @property
    def size(self) -> int:
        return self.vectors.shape[0]


def init_random_embedding(vocab: Vocabulary, dim: int, seed: int) -> EmbeddingMatrix:
    """Uniform vectors in [-0.25, 0.25] for every non-padding row."""
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(seed)
    vectors = rng.uniform(-RANDOM_INIT_BOUND, RANDOM_INIT_BOUND, size=(vocab.size, dim))
    vectors[PAD_INDEX] = 0.0
    return EmbeddingMatrix(vectors=vectors, dim=dim, source="random")


def load_embedding_file(path, vocab: Vocabulary, seed: int = 0,
                        source: str = "pretrained_general") -> EmbeddingMatrix:
    """Load vectors from word-vector text format, filling gaps randomly.

    The file may start with a "count dim" header; each following line is
    "token v1 … v_dim".  Vocabulary tokens present in the file take the file
    vectors; missing tokens keep the seeded random-init rows, so the result
    for those rows equals ``init_random_embedding(vocab, dim, seed)``.
    """
    path = Path(path)
    file_vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p != ""]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingFormatError(
                    f"{path}: line {lineno}: expected {dim} values, got {len(values)}")
            try:
                file_vectors[token] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}: line {lineno}: {exc}") from exc
    if dim is None:
        raise EmbeddingFormatError(f"{path}: no vectors found")
    base = init_random_embedding(vocab, dim, seed)
    vectors = base.vectors
    for token, index in vocab.token_to_index.items():
        if token in file_vectors:
            vectors[index] = file_vectors[token]
    return EmbeddingMatrix(vectors=vectors, dim=dim, source=source)


def save_embedding_file(matrix: EmbeddingMatrix, vocab: Vocabulary, path) -> None:
    """Write vocabulary rows in word-vector text format, round-trip lossless.

    Values are printed with shortest-round-trip precision, so loading the
    file back reproduces the exact float64 values.
    """
    path = Path(path)
    tokens = vocab.tokens_by_index()
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(tokens)} {matrix.dim}\n")
        for token in tokens:
            row = matrix.vectors[vocab.token_to_index[token]]
            fh.write(token + " " + " ".join(repr(float(v)) for v in row) + "\n")
