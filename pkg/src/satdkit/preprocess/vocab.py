"""Vocabulary construction, section encoding, and JSONL persistence."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD_INDEX = 0
UNK_INDEX = 1
RESERVED = 2


class VocabularyFormatError(ValueError):
    """A vocabulary file violates the JSONL schema."""


@dataclass
class Vocabulary:
    """Token → dense index map with indices 0/1 reserved for pad/unknown."""

    token_to_index: dict[str, int]
    min_count: int
    counts: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for token, index in self.token_to_index.items():
            if index < RESERVED:
                raise ValueError(f"token {token!r} assigned reserved index {index}")
        indices = sorted(self.token_to_index.values())
        if indices != list(range(RESERVED, RESERVED + len(indices))):
            raise ValueError("token indices must be dense starting at 2")

    @property
    def size(self) -> int:
        return RESERVED + len(self.token_to_index)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def tokens_by_index(self) -> list[str]:
        """Tokens ordered by index (offset by the two reserved slots)."""
        ordered = [""] * len(self.token_to_index)
        for token, index in self.token_to_index.items():
            ordered[index - RESERVED] = token
        return ordered

    def content_hash(self) -> str:
        import hashlib

        payload = json.dumps(sorted(self.token_to_index.items()), ensure_ascii=False)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class EncodedSection:
    """Fixed-length index sequence with the unpadded length recorded."""

    indices: tuple[int, ...]
    true_length: int

    def __post_init__(self):
        if any(i != PAD_INDEX for i in self.indices[self.true_length:]):
            raise ValueError("entries beyond true_length must be padding")

    @property
    def max_len(self) -> int:
        return len(self.indices)


def build_vocabulary(corpus, min_count: int = 1) -> Vocabulary:
    """Index every token with frequency ≥ min_count.

    Indices are assigned by descending frequency, ties broken
    lexicographically, starting after the reserved pad/unknown slots — so
    equal corpora always produce identical vocabularies.
    """
    counts: Counter[str] = Counter()
    for tokens in corpus:
        counts.update(tokens)
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    token_to_index = {t: i + RESERVED for i, t in enumerate(kept)}
    return Vocabulary(token_to_index=token_to_index, min_count=min_count,
                      counts={t: counts[t] for t in kept})


def encode(tokens, vocab: Vocabulary, max_len: int) -> EncodedSection:
    """Map tokens to indices, truncating the tail and padding with zeros."""
    if max_len < 1:
        raise ValueError("max_len must be positive")
    kept = list(tokens)[:max_len]
    indices = [vocab.index_of(t) for t in kept]
    indices.extend([PAD_INDEX] * (max_len - len(indices)))
    return EncodedSection(indices=tuple(indices), true_length=len(kept))


def encode_batch(token_lists, vocab: Vocabulary, max_len: int):
    """Encode many sections into (indices, lengths) arrays for the model."""
    n = len(token_lists)
    indices = np.zeros((n, max_len), dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    for i, tokens in enumerate(token_lists):
        enc = encode(tokens, vocab, max_len)
        indices[i] = enc.indices
        lengths[i] = enc.true_length
    return indices, lengths


def save_vocabulary(vocab: Vocabulary, path) -> None:
    """Persist as JSONL of {token, index, count} in index order."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"min_count": vocab.min_count}) + "\n")
        for token in vocab.tokens_by_index():
            record = {"token": token, "index": vocab.token_to_index[token],
                      "count": vocab.counts.get(token, 0)}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_vocabulary(path) -> Vocabulary:
    path = Path(path)
    token_to_index: dict[str, int] = {}
    counts: dict[str, int] = {}
    min_count = 1
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise VocabularyFormatError(f"{path}: line {lineno}: invalid JSON") from exc
            if lineno == 1 and "min_count" in record and "token" not in record:
                min_count = int(record["min_count"])
                continue
            for name in ("token", "index", "count"):
                if name not in record:
                    raise VocabularyFormatError(
                        f"{path}: line {lineno}: missing field {name!r}")
            token_to_index[record["token"]] = int(record["index"])
            counts[record["token"]] = int(record["count"])
    try:
        return Vocabulary(token_to_index=token_to_index, min_count=min_count, counts=counts)
    except ValueError as exc:
        raise VocabularyFormatError(f"{path}: {exc}") from exc
