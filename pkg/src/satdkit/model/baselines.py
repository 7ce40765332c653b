"""Reference baselines: chance-rate random flagging and a fixed phrase list."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from ..preprocess.text import tokenize


def random_baseline(train_labels, test_size: int, seed: int) -> np.ndarray:
    """Flag each test item independently with the training positive rate."""
    train_labels = list(train_labels)
    if not train_labels:
        raise ValueError("train_labels must be non-empty")
    p = sum(1 for l in train_labels if l) / len(train_labels)
    rng = np.random.default_rng(seed)
    return rng.random(test_size) < p


def load_keyword_phrases(path=None) -> list[tuple[str, ...]]:
    """Load debt-signal phrases (one per line) tokenized like section text."""
    if path is None:
        text = resources.files("satdkit.data").joinpath("satd_keywords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    phrases = []
    for line in text.splitlines():
        tokens = tuple(tokenize(line))
        if tokens:
            phrases.append(tokens)
    return phrases


def keyword_baseline(section_tokens, keyword_phrases) -> bool:
    """True iff any phrase occurs as a contiguous whole-token subsequence."""
    tokens = list(section_tokens)
    n = len(tokens)
    for phrase in keyword_phrases:
        m = len(phrase)
        if m == 0 or m > n:
            continue
        first = phrase[0]
        for start in range(n - m + 1):
            if tokens[start] == first and tuple(tokens[start:start + m]) == tuple(phrase):
                return True
    return False
