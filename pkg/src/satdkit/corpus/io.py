"""JSONL persistence for labeled section datasets and exclusion logs."""

from __future__ import annotations

import json
from pathlib import Path

from .types import IssueSection, LabeledDataset, SATDLabel

DATASET_FIELDS = (
    "project", "tracker", "issue_id", "kind", "position", "author",
    "text", "raw_text", "is_satd", "satd_type", "indicator",
)

_FIELD_TYPES = {
    "project": str, "tracker": str, "issue_id": str, "kind": str,
    "position": int, "author": str, "text": str, "raw_text": str,
    "is_satd": bool, "satd_type": (str, type(None)), "indicator": (str, type(None)),
}


class DatasetFormatError(ValueError):
    """A dataset file violates the JSONL schema; message names line and field."""


def _check_unique(sections, context: str):
    seen: dict[tuple, int] = {}
    for i, section in enumerate(sections):
        ref = section.ref
        if ref in seen:
            raise DatasetFormatError(
                f"{context}: duplicate section identity {ref} at records "
                f"{seen[ref]} and {i}")
        seen[ref] = i


def save_dataset(dataset: LabeledDataset, path) -> None:
    """Write one JSON object per section+label pair, UTF-8, stable field order."""
    path = Path(path)
    _check_unique(dataset.sections, f"save to {path}")
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for section, label in dataset:
            record = {
                "project": section.project,
                "tracker": section.tracker,
                "issue_id": section.issue_id,
                "kind": section.kind,
                "position": section.position,
                "author": section.author,
                "text": section.text,
                "raw_text": section.raw_text,
                "is_satd": label.is_satd,
                "satd_type": label.satd_type,
                "indicator": label.indicator,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_dataset(path) -> LabeledDataset:
    """Read and validate a JSONL dataset; errors name the line and field."""
    path = Path(path)
    sections: list[IssueSection] = []
    labels: list[SATDLabel] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DatasetFormatError(f"{path}: line {lineno}: expected a JSON object")
            for name in DATASET_FIELDS:
                if name not in record:
                    raise DatasetFormatError(f"{path}: line {lineno}: missing field {name!r}")
                value = record[name]
                bad = not isinstance(value, _FIELD_TYPES[name])
                if name == "position" and isinstance(value, bool):
                    bad = True
                if bad:
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: field {name!r} has wrong type "
                        f"{type(value).__name__}")
            try:
                sections.append(IssueSection(
                    project=record["project"], tracker=record["tracker"],
                    issue_id=record["issue_id"], kind=record["kind"],
                    position=record["position"], author=record["author"],
                    text=record["text"], raw_text=record["raw_text"],
                ))
                labels.append(SATDLabel(
                    is_satd=record["is_satd"],
                    satd_type=record["satd_type"],
                    indicator=record["indicator"],
                ))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from exc
    _check_unique(sections, f"load from {path}")
    return LabeledDataset(sections=sections, labels=labels, provenance=f"loaded from {path}")


def save_exclusions(entries: list[dict], path) -> None:
    """Write the exclusion log: one {issue_id, reason} object per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(json.dumps({"issue_id": entry["issue_id"], "reason": entry["reason"]},
                                ensure_ascii=False) + "\n")


def load_exclusions(path) -> list[dict]:
    path = Path(path)
    entries = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(json.loads(line))
    return entries


def save_raw_issues(issues, path) -> None:
    """Write fetched issues as JSONL: one issue with its ordered comments per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for issue in issues:
            record = {
                "project": issue.project,
                "tracker": issue.tracker,
                "issue_id": issue.issue_id,
                "summary": issue.summary,
                "description": issue.description,
                "comments": [
                    {"author": c.author, "text": c.text,
                     "created": c.created, "comment_id": c.comment_id}
                    for c in issue.comments
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_raw_issues(path):
    """Read an issues JSONL file back into RawIssue objects."""
    from .types import RawComment, RawIssue

    path = Path(path)
    issues = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                comments = tuple(
                    RawComment(author=c["author"], text=c["text"],
                               created=c["created"], comment_id=c["comment_id"])
                    for c in record.get("comments", ()))
                issues.append(RawIssue(
                    project=record["project"], tracker=record["tracker"],
                    issue_id=record["issue_id"], summary=record["summary"],
                    description=record.get("description"), comments=comments))
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from exc
    return issues
