"""Strategies for the skewed label distribution: class weights, minority
oversampling, and EDA-style text augmentation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .corpus.types import IssueSection, LabeledDataset


class SingleClassError(ValueError):
    """Raised when a strategy needs both classes; use unweighted loss instead."""


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights, exact rationals so identities hold exactly."""

    weight_per_class: dict[bool, Fraction]

    def __post_init__(self):
        if any(w <= 0 for w in self.weight_per_class.values()):
            raise ValueError("class weights must be positive")

    def as_array(self) -> np.ndarray:
        """Weights as float64 [negative, positive] for the training loop."""
        return np.array([float(self.weight_per_class[False]),
                         float(self.weight_per_class[True])])


def compute_class_weights(labels) -> ClassWeights:
    """weight(c) = N_total / (2 · N_c): the rarer class weighs more."""
    labels = list(labels)
    n_pos = sum(1 for l in labels if l)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            "class weights need both classes present; train with unweighted loss instead")
    total = len(labels)
    return ClassWeights(weight_per_class={
        False: Fraction(total, 2 * n_neg),
        True: Fraction(total, 2 * n_pos),
    })


def oversample(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Replicate minority sections until class counts match, then shuffle.

    Replication cycles whole copies of the minority list; the remainder is a
    seeded draw without replacement.  Copies carry origin="oversampled";
    original records pass through untouched.
    """
    n_pos = dataset.positive_count
    n_neg = len(dataset) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("oversampling needs both classes present")
    minority_flag = n_pos < n_neg
    minority = [i for i, lab in enumerate(dataset.labels) if lab.is_satd == minority_flag]
    deficit = abs(n_neg - n_pos)
    rng = np.random.default_rng(seed)

    pairs = list(zip(dataset.sections, dataset.labels))
    extra_indices = minority * (deficit // len(minority))
    remainder = deficit % len(minority)
    if remainder:
        extra_indices.extend(rng.choice(minority, size=remainder, replace=False).tolist())
    for i in extra_indices:
        pairs.append((replace(dataset.sections[i], origin="oversampled"), dataset.labels[i]))

    order = rng.permutation(len(pairs))
    return LabeledDataset(
        sections=[pairs[i][0] for i in order],
        labels=[pairs[i][1] for i in order],
        provenance=dataset.provenance,
    )


@dataclass(frozen=True)
class EdaConfig:
    """Parameters for text augmentation; alpha=0 or n_aug=0 disables change."""

    alpha: float = 0.1
    n_aug: int = 4
    seed: int = 0
    synonym_source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_aug < 0:
            raise ValueError("n_aug must be non-negative")


def load_synonyms(path) -> dict[str, list[str]]:
    """Read a JSONL thesaurus of {token, synonyms:[...]} records."""
    path = Path(path)
    table: dict[str, list[str]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            table[record["token"]] = list(record["synonyms"])
    return table


def _op_count(alpha: float, length: int) -> int:
    return math.ceil(alpha * length)


def synonym_replacement(tokens: list[str], n: int, rng, synonyms) -> list[str]:
    """Replace up to n tokens that have synonyms with a random synonym each."""
    out = list(tokens)
    candidates = [i for i, t in enumerate(out) if synonyms.get(t)]
    if not candidates or n <= 0:
        return out
    chosen = rng.choice(candidates, size=min(n, len(candidates)), replace=False)
    for i in chosen:
        options = synonyms[out[i]]
        out[i] = options[int(rng.integers(0, len(options)))]
    return out


def random_insertion(tokens: list[str], n: int, rng, synonyms) -> list[str]:
    """Insert n synonyms of random synonym-bearing tokens at random spots."""
    out = list(tokens)
    for _ in range(n):
        candidates = [t for t in out if synonyms.get(t)]
        if not candidates:
            break
        word = candidates[int(rng.integers(0, len(candidates)))]
        options = synonyms[word]
        synonym = options[int(rng.integers(0, len(options)))]
        out.insert(int(rng.integers(0, len(out) + 1)), synonym)
    return out


def random_swap(tokens: list[str], n: int, rng) -> list[str]:
    """Swap n random position pairs; token multiset is preserved."""
    out = list(tokens)
    if len(out) < 2:
        return out
    for _ in range(n):
        i, j = rng.choice(len(out), size=2, replace=False)
        out[i], out[j] = out[j], out[i]
    return out


def random_deletion(tokens: list[str], p: float, rng) -> list[str]:
    """Drop each token independently with probability p; never drop all."""
    if p <= 0.0:
        return list(tokens)
    keep = rng.random(len(tokens)) >= p
    out = [t for t, k in zip(tokens, keep) if k]
    if not out:
        out = [tokens[int(rng.integers(0, len(tokens)))]]
    return out


def eda_augment(section_tokens: list[str], cfg: EdaConfig) -> list[list[str]]:
    """Produce n_aug synthetic token lists, one random transformation each."""
    if not section_tokens:
        raise ValueError("cannot augment an empty token list")
    rng = np.random.default_rng(cfg.seed)
    n_ops = _op_count(cfg.alpha, len(section_tokens))
    out = []
    for _ in range(cfg.n_aug):
        op = int(rng.integers(0, 4))
        if op == 0:
            out.append(synonym_replacement(section_tokens, n_ops, rng, cfg.synonym_source))
        elif op == 1:
            out.append(random_insertion(section_tokens, n_ops, rng, cfg.synonym_source))
        elif op == 2:
            out.append(random_swap(section_tokens, n_ops, rng))
        else:
            out.append(random_deletion(section_tokens, cfg.alpha, rng))
    return out


def balance_with_eda(dataset: LabeledDataset, cfg: EdaConfig, tokenizer=None) -> LabeledDataset:
    """Append synthetic positives until class counts are equal.

    Synthetic sections are built round-by-round (one variant per original
    positive per round, dataset order) with the last round truncated; each
    carries origin="augmented" so the evaluation harness can audit that none
    reaches a test fold.  Balanced input is returned unchanged.
    """
    from .preprocess.text import tokenize as default_tokenizer

    tokenizer = tokenizer or default_tokenizer
    n_pos = dataset.positive_count
    n_neg = len(dataset) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("EDA balancing needs both classes present")
    deficit = n_neg - n_pos
    if deficit <= 0:
        return dataset

    rounds = math.ceil(deficit / n_pos)
    if cfg.n_aug < rounds:
        raise ValueError(
            f"n_aug={cfg.n_aug} cannot close a deficit of {deficit} with {n_pos} "
            f"positives; need n_aug >= {rounds}")

    positives = [(i, s, l) for i, (s, l) in enumerate(dataset) if l.is_satd]
    variants: list[list[list[str]]] = []
    for i, section, _ in positives:
        per_section = replace(cfg, seed=int(np.random.default_rng([cfg.seed, i]).integers(2**32)))
        variants.append(eda_augment(tokenizer(section.text), per_section))

    sections = list(dataset.sections)
    labels = list(dataset.labels)
    added = 0
    for round_idx in range(rounds):
        for (_, section, label), variant_lists in zip(positives, variants):
            if added == deficit:
                break
            text = " ".join(variant_lists[round_idx])
            sections.append(IssueSection(
                project=section.project, tracker=section.tracker,
                issue_id=section.issue_id, kind=section.kind,
                position=section.position, author=section.author,
                text=text, raw_text=text, origin="augmented"))
            labels.append(label)
            added += 1
    return LabeledDataset(sections=sections, labels=labels, provenance=dataset.provenance)
