"""Interpretability layer: trace pooled activations back to input n-grams.

Each 1-max-pooled feature map remembers the position that produced its
maximum; walking back through the filter's region size yields the exact
n-gram the feature fired on.  Feature importance is the pooled activation
times the output-layer weight toward the positive class.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus.types import LabeledDataset
from .model.textcnn import (
    POSITIVE_CLASS,
    TextCnnModel,
    TrainingData,
    cnn_forward,
    cnn_predict,
)
from .preprocess.text import tokenize
from .preprocess.vocab import EncodedSection, Vocabulary, encode

WEAK_LINK_PERCENTILE = 30.0


@dataclass(frozen=True)
class KeywordRecord:
    """One extracted n-gram with its importance and source section."""

    tokens: tuple[str, ...]
    n: int
    weight: float
    section_ref: tuple[str, str, str, int] | None = None

    def __post_init__(self):
        if self.n != len(self.tokens):
            raise ValueError(f"n={self.n} != len(tokens)={len(self.tokens)}")

    @property
    def ngram(self) -> str:
        return " ".join(self.tokens)


@dataclass
class KeywordTable:
    """Ranked (ngram, aggregated_weight, project_count) rows per n-gram size."""

    per_n: dict[int, list[tuple[str, float, int]]]
    top_fraction: float

    def __post_init__(self):
        if not 0.0 < self.top_fraction <= 1.0:
            raise ValueError("top_fraction must lie in (0, 1]")
        for n, rows in self.per_n.items():
            ranked = sorted(rows, key=lambda row: (-row[1], row[0]))
            if rows != ranked:
                raise ValueError(f"rows for n={n} are not ranked by descending weight")

    def keyword_set(self, sizes=None) -> set[str]:
        chosen = sizes if sizes is not None else sorted(self.per_n)
        out: set[str] = set()
        for n in chosen:
            out.update(row[0] for row in self.per_n.get(n, []))
        return out

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "ngram", "weight", "project_count"])
            for n in sorted(self.per_n):
                for ngram, weight, project_count in self.per_n[n]:
                    writer.writerow([n, ngram, repr(weight), project_count])
        return path


def load_keyword_csv(path) -> dict[int, list[tuple[str, float, int]]]:
    """Read a KeywordTable CSV back into per-n rows (file order preserved)."""
    path = Path(path)
    per_n: dict[int, list[tuple[str, float, int]]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["n", "ngram", "weight", "project_count"]:
            raise ValueError(f"{path}: not a keyword table CSV (header {header})")
        for row in reader:
            if not row:
                continue
            n, ngram, weight, project_count = row
            per_n.setdefault(int(n), []).append((ngram, float(weight), int(project_count)))
    return per_n


def extract_section_keywords(model: TextCnnModel, encoded: EncodedSection,
                             tokens, top_m_features: int = 10,
                             section_ref=None) -> list[KeywordRecord]:
    """Back-track the strongest features of one section to their n-grams.

    Only features whose region size fits inside the section have a winning
    position; a section shorter than every region size yields an empty list.
    Ties in the importance score keep the lower feature index.
    """
    tokens = list(tokens)
    _, record = cnn_forward(model, encoded, capture_activations=True)
    scores = record.pooled * model.output_weights[:, POSITIVE_CLASS]
    eligible = np.flatnonzero(record.argmax >= 0)
    if eligible.size == 0:
        return []
    order = eligible[np.argsort(-scores[eligible], kind="stable")]
    out: list[KeywordRecord] = []
    for feature in order[:top_m_features]:
        r = int(record.region_sizes[feature])
        start = int(record.argmax[feature])
        gram = tuple(tokens[start:start + r])
        out.append(KeywordRecord(tokens=gram, n=r, weight=float(scores[feature]),
                                 section_ref=section_ref))
    return out


def aggregate_keywords(model: TextCnnModel, dataset: LabeledDataset, vocab: Vocabulary,
                       top_fraction: float = 0.1, top_m_features: int = 10,
                       per_project: bool = False):
    """Aggregate per-section keywords over the sections the model flags.

    Within a section, duplicate n-grams keep their maximum weight (presence
    counting); across sections weights are summed.  Rows are ranked by
    descending aggregated weight, ties lexicographic, and cut to the top
    fraction of distinct n-grams per size.  With ``per_project`` the same
    aggregation runs separately per project.
    """
    max_len = model.config.max_len
    encoded = [encode(tokenize(s.text), vocab, max_len) for s in dataset.sections]
    keep = [i for i, e in enumerate(encoded) if e.true_length >= 1]
    flagged: list[int] = []
    if keep:
        data = TrainingData(
            indices=np.array([encoded[i].indices for i in keep], dtype=np.int64),
            lengths=np.array([encoded[i].true_length for i in keep], dtype=np.int64),
            labels=np.zeros(len(keep), dtype=np.int64),
        )
        predicted, _ = cnn_predict(model, data)
        flagged = [i for i, p in zip(keep, predicted) if p]

    groups: dict[str, list[int]] = {}
    for i in flagged:
        key = dataset.sections[i].project if per_project else "__all__"
        groups.setdefault(key, []).append(i)

    tables: dict[str, KeywordTable] = {}
    for key, indices in groups.items():
        totals: dict[tuple[int, str], float] = {}
        projects: dict[tuple[int, str], set[str]] = {}
        for i in indices:
            section = dataset.sections[i]
            records = extract_section_keywords(
                model, encoded[i], tokenize(section.text),
                top_m_features=top_m_features, section_ref=section.ref)
            best: dict[tuple[int, str], float] = {}
            for rec in records:
                gram_key = (rec.n, rec.ngram)
                if gram_key not in best or rec.weight > best[gram_key]:
                    best[gram_key] = rec.weight
            for gram_key, weight in best.items():
                totals[gram_key] = totals.get(gram_key, 0.0) + weight
                projects.setdefault(gram_key, set()).add(section.project)
        per_n: dict[int, list[tuple[str, float, int]]] = {}
        for (n, ngram), weight in totals.items():
            per_n.setdefault(n, []).append((ngram, weight, len(projects[(n, ngram)])))
        for n, rows in per_n.items():
            rows.sort(key=lambda row: (-row[1], row[0]))
            cut = max(1, math.ceil(top_fraction * len(rows)))
            per_n[n] = rows[:cut]
        tables[key] = KeywordTable(per_n=per_n, top_fraction=top_fraction)
    if per_project:
        return tables
    return tables.get("__all__", KeywordTable(per_n={}, top_fraction=top_fraction))


def keyword_overlap(tables: dict[str, set]) -> tuple[list[str], np.ndarray]:
    """Pairwise intersection counts; the diagonal holds the set sizes."""
    if len(tables) < 2:
        raise ValueError("overlap needs at least 2 keyword sets")
    labels = list(tables)
    n = len(labels)
    matrix = np.zeros((n, n), dtype=np.int64)
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            matrix[i, j] = len(tables[a] & tables[b]) if i != j else len(tables[a])
    return labels, matrix


def emit_overlap_plot_data(labels: list[str], matrix: np.ndarray, fmt: str, path) -> Path:
    """Export the labeled matrix as csv, heatmap_csv, or chord_json.

    chord_json lists each undirected pair once and flags links at or below
    the 30th percentile of link values as weak.
    """
    path = Path(path)
    n = len(labels)
    if matrix.shape != (n, n):
        raise ValueError(f"matrix shape {matrix.shape} does not match {n} labels")
    if fmt == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([""] + labels)
            for i, label in enumerate(labels):
                writer.writerow([label] + [int(v) for v in matrix[i]])
        return path
    if fmt == "heatmap_csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["row", "col", "value"])
            for i, row_label in enumerate(labels):
                for j, col_label in enumerate(labels):
                    writer.writerow([row_label, col_label, int(matrix[i, j])])
        return path
    if fmt == "chord_json":
        links = []
        values = [int(matrix[i, j]) for i in range(n) for j in range(i + 1, n)]
        cutoff = float(np.percentile(values, WEAK_LINK_PERCENTILE)) if values else 0.0
        for i in range(n):
            for j in range(i + 1, n):
                value = int(matrix[i, j])
                links.append({"source": labels[i], "target": labels[j],
                              "value": value, "weak": value <= cutoff})
        payload = {"labels": labels, "links": links,
                   "weak_percentile": WEAK_LINK_PERCENTILE}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path
    raise ValueError(f"unknown format {fmt!r}; expected csv, heatmap_csv, or chord_json")
