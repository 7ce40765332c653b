"""Corpus-trained subword embeddings: skip-gram with negative sampling.

Every vocabulary word owns one whole-word vector plus hashed character
n-gram (3-6) vectors; a word's embedding is the sum of its unit vectors.
All randomness (window reductions, negative draws) is precomputed with a
seeded generator outside the hot loop, so both kernel backends consume the
same stream and training is deterministic per seed when single-threaded.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from .embeddings import EmbeddingMatrix, init_random_embedding
from .vocab import RESERVED, UNK_INDEX, Vocabulary

NEGATIVE_POWER = 0.75
FNV_PRIME = 0x01000193
FNV_OFFSET = 0x811C9DC5


def _fnv1a(data: bytes) -> int:
    value = FNV_OFFSET
    for byte in data:
        value = ((value ^ byte) * FNV_PRIME) & 0xFFFFFFFF
    return value


def char_ngrams(word: str, min_n: int = 3, max_n: int = 6) -> list[str]:
    """Character n-grams of the boundary-wrapped word, whole word excluded."""
    wrapped = f"<{word}>"
    grams = []
    for n in range(min_n, max_n + 1):
        if n >= len(wrapped):
            break
        for start in range(len(wrapped) - n + 1):
            grams.append(wrapped[start:start + n])
    return grams


def _word_units(words: list[str], min_n: int, max_n: int, buckets: int):
    """CSR-style unit lists: word w uses row w plus hashed n-gram rows."""
    n_words = len(words)
    indptr = np.zeros(n_words + 1, dtype=np.int64)
    ids: list[int] = []
    for w, word in enumerate(words):
        units = [w]
        for gram in char_ngrams(word, min_n, max_n):
            units.append(n_words + _fnv1a(gram.encode("utf-8")) % buckets)
        ids.extend(units)
        indptr[w + 1] = len(ids)
    return indptr, np.array(ids, dtype=np.int64)


def _epoch_pairs(sentences, rng, window: int):
    """(center, context) pairs with per-position reduced windows."""
    centers: list[int] = []
    contexts: list[int] = []
    for sent in sentences:
        n = len(sent)
        if n < 2:
            continue
        reduced = rng.integers(1, window + 1, size=n)
        for i in range(n):
            b = int(reduced[i])
            for j in range(max(0, i - b), min(n, i + b + 1)):
                if j != i:
                    centers.append(sent[i])
                    contexts.append(sent[j])
    return (np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64))


def train_corpus_embedding(corpus, vocab: Vocabulary, dim: int, seed: int,
                           epochs: int = 5, window: int = 5, negatives: int = 5,
                           min_n: int = 3, max_n: int = 6, buckets: int = 1 << 17,
                           learning_rate: float = 0.05) -> EmbeddingMatrix:
    """Train subword skip-gram vectors on token lists; rows align with vocab.

    Tokens outside the vocabulary are dropped from training sentences.  The
    returned matrix keeps the seeded random-init row for the unknown token
    and zeros for padding.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    words = vocab.tokens_by_index()
    n_words = len(words)
    base = init_random_embedding(vocab, dim, seed)
    if n_words == 0:
        return EmbeddingMatrix(vectors=base.vectors, dim=dim, source="corpus_trained")

    rng = np.random.default_rng(seed)
    indptr, unit_ids = _word_units(words, min_n, max_n, buckets)
    vin = ((rng.random((n_words + buckets, dim)) - 0.5) / dim).astype(np.float32)
    vout = np.zeros((n_words, dim), dtype=np.float32)

    counts = np.array([max(vocab.counts.get(w, 1), 1) for w in words], dtype=np.float64)
    probs = counts ** NEGATIVE_POWER
    probs /= probs.sum()

    sentences = []
    for tokens in corpus:
        sent = [vocab.token_to_index[t] - RESERVED for t in tokens if t in vocab]
        if len(sent) >= 2:
            sentences.append(sent)

    epoch_pairs = [_epoch_pairs(sentences, rng, window) for _ in range(epochs)]
    total = sum(len(c) for c, _ in epoch_pairs)
    done = 0
    for centers, contexts in epoch_pairs:
        n_pairs = len(centers)
        if n_pairs == 0:
            continue
        negs = rng.choice(n_words, size=(n_pairs, negatives), p=probs).astype(np.int64)
        lr_start = learning_rate * (1.0 - done / total)
        lr_end = learning_rate * (1.0 - (done + n_pairs) / total)
        kernels.skipgram_epoch(vin, vout, indptr, unit_ids, centers, contexts,
                               negs, lr_start, lr_end)
        done += n_pairs

    vectors = base.vectors.copy()
    for w in range(n_words):
        lo, hi = indptr[w], indptr[w + 1]
        vectors[w + RESERVED] = vin[unit_ids[lo:hi]].sum(axis=0, dtype=np.float64)
    vectors[UNK_INDEX] = base.vectors[UNK_INDEX]
    return EmbeddingMatrix(vectors=vectors, dim=dim, source="corpus_trained")


def token_vector(matrix_vin: np.ndarray, word_id: int, indptr, unit_ids) -> np.ndarray:
    """Sum of a word's unit vectors (exposed for diagnostics and tests)."""
    lo, hi = indptr[word_id], indptr[word_id + 1]
    return matrix_vin[unit_ids[lo:hi]].sum(axis=0, dtype=np.float64)
