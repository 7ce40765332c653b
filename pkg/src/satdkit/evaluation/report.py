"""Evaluation reports with deterministic JSON/CSV serialization.

Wall-clock timings are carried in memory and surface in the run manifest,
but are excluded from the report files so that re-running an identical
configuration yields byte-identical reports.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import ConfusionCounts, EvalMetrics, mean_metrics


@dataclass
class EvalReport:
    per_fold: list[tuple[ConfusionCounts, EvalMetrics]]
    averages: EvalMetrics
    config_fingerprint: str
    wall_times: list[float] = field(default_factory=list, compare=False)
    flags: list[str] = field(default_factory=list)
    predictions: list[dict] | None = field(default=None, compare=False)

    def __post_init__(self):
        expected = mean_metrics([m for _, m in self.per_fold])
        for name in ("precision", "recall", "f1"):
            if abs(getattr(expected, name) - getattr(self.averages, name)) > 1e-12:
                raise ValueError(f"averages.{name} is not the mean of per-fold values")

    def to_dict(self, include_timing: bool = False) -> dict:
        payload = {
            "per_fold": [
                {"fold": i,
                 "counts": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
                 "precision": m.precision, "recall": m.recall, "f1": m.f1}
                for i, (c, m) in enumerate(self.per_fold)
            ],
            "averages": {"precision": self.averages.precision,
                         "recall": self.averages.recall,
                         "f1": self.averages.f1},
            "config_fingerprint": self.config_fingerprint,
            "flags": list(self.flags),
        }
        if include_timing:
            payload["wall_times"] = list(self.wall_times)
        return payload

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing),
                          indent=2, sort_keys=True) + "\n"

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / f"{stem}.json"
        csv_path = out_dir / f"{stem}.csv"
        json_path.write_text(self.to_json(), encoding="utf-8")
        with csv_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["fold", "tp", "fp", "tn", "fn", "precision", "recall", "f1"])
            for i, (c, m) in enumerate(self.per_fold):
                writer.writerow([i, c.tp, c.fp, c.tn, c.fn,
                                 repr(m.precision), repr(m.recall), repr(m.f1)])
            writer.writerow(["average", "", "", "", "",
                             repr(self.averages.precision), repr(self.averages.recall),
                             repr(self.averages.f1)])
        return json_path, csv_path


def build_report(fold_results, config_fingerprint: str, wall_times=None,
                 flags=None, predictions=None) -> EvalReport:
    """Assemble a report from (ConfusionCounts, EvalMetrics) pairs."""
    metrics = [m for _, m in fold_results]
    return EvalReport(
        per_fold=list(fold_results),
        averages=mean_metrics(metrics),
        config_fingerprint=config_fingerprint,
        wall_times=list(wall_times or []),
        flags=list(flags or []),
        predictions=predictions,
    )


def fingerprint_config(payload: dict) -> str:
    """Stable hash over every resolved configuration value and seed."""
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()
