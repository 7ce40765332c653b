"""Core record types for issue-tracker text datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

TRACKERS = ("jira", "monorail")
SECTION_KINDS = ("summary", "description", "comment")

# Debt categories and the admissible indicator phrases within each.
SATD_TYPE_INDICATORS = {
    "architecture": (
        "violation of modularity",
        "using obsolete technology",
    ),
    "build": (
        "over- or under-declared dependencies",
        "poor deployment practice",
    ),
    "code": (
        "complex code",
        "dead code",
        "duplicated code",
        "low-quality code",
        "multi-thread correctness",
        "slow algorithm",
    ),
    "defect": (
        "uncorrected known defects",
    ),
    "design": (
        "non-optimal decisions",
    ),
    "documentation": (
        "low-quality documentation",
        "outdated documentation",
    ),
    "requirement": (
        "requirements partially implemented",
        "non-functional requirements not being fully satisfied",
    ),
    "test": (
        "expensive tests",
        "flaky tests",
        "lack of tests",
        "low coverage",
    ),
}

SATD_TYPES = tuple(SATD_TYPE_INDICATORS)


@dataclass(frozen=True)
class IssueSection:
    """One summary, description, or comment of a tracker issue.

    ``text`` is ``raw_text`` with code blocks stripped, so it can never be
    longer than ``raw_text``.  ``origin`` marks how the record entered a
    training set ("original", "oversampled", "augmented"); it is ignored by
    equality and never persisted.
    """

    project: str
    tracker: str
    issue_id: str
    kind: str
    position: int
    author: str
    text: str
    raw_text: str
    origin: str = field(default="original", compare=False)

    def __post_init__(self):
        if self.tracker not in TRACKERS:
            raise ValueError(f"unknown tracker {self.tracker!r}; expected one of {TRACKERS}")
        if self.kind not in SECTION_KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {SECTION_KINDS}")
        if self.position < 0:
            raise ValueError(f"position must be non-negative, got {self.position}")
        if self.kind != "comment" and self.position != 0:
            raise ValueError(f"position must be 0 for kind {self.kind!r}, got {self.position}")
        if len(self.text) > len(self.raw_text):
            raise ValueError("text longer than raw_text; cleaning only removes characters")

    @property
    def ref(self) -> tuple[str, str, str, int]:
        """Identity tuple used for uniqueness checks and cross-references."""
        return (self.project, self.issue_id, self.kind, self.position)

    def synthetic(self) -> bool:
        return self.origin != "original"


@dataclass(frozen=True)
class SATDLabel:
    """Binary debt label with optional category and indicator tags."""

    is_satd: bool
    satd_type: str | None = None
    indicator: str | None = None

    def __post_init__(self):
        if not self.is_satd:
            if self.satd_type is not None or self.indicator is not None:
                raise ValueError("satd_type/indicator require is_satd=True")
            return
        if self.indicator is not None and self.satd_type is None:
            raise ValueError("indicator requires a satd_type")
        if self.satd_type is not None:
            if self.satd_type not in SATD_TYPE_INDICATORS:
                raise ValueError(
                    f"unknown satd_type {self.satd_type!r}; expected one of {SATD_TYPES}")
            allowed = SATD_TYPE_INDICATORS[self.satd_type]
            if self.indicator is not None and self.indicator not in allowed:
                raise ValueError(
                    f"indicator {self.indicator!r} does not belong to type "
                    f"{self.satd_type!r}; expected one of {allowed}")


@dataclass
class LabeledDataset:
    """Parallel lists of sections and labels, plus a free-text provenance note.

    Uniqueness of section identity tuples is enforced at the persistence
    boundary (save/load), not here: derived training sets legitimately hold
    replicated or synthetic copies.
    """

    sections: list[IssueSection]
    labels: list[SATDLabel]
    provenance: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.sections) != len(self.labels):
            raise ValueError(
                f"sections/labels length mismatch: {len(self.sections)} != {len(self.labels)}")

    def __len__(self) -> int:
        return len(self.sections)

    def __iter__(self):
        return iter(zip(self.sections, self.labels))

    @property
    def positive_count(self) -> int:
        return sum(1 for lab in self.labels if lab.is_satd)

    def bool_labels(self) -> list[bool]:
        return [lab.is_satd for lab in self.labels]

    def subset(self, indices, provenance: str = "") -> "LabeledDataset":
        return LabeledDataset(
            sections=[self.sections[i] for i in indices],
            labels=[self.labels[i] for i in indices],
            provenance=provenance or self.provenance,
        )

    def projects(self) -> list[str]:
        seen: dict[str, None] = {}
        for s in self.sections:
            seen.setdefault(s.project, None)
        return list(seen)

    def trackers(self) -> list[str]:
        seen: dict[str, None] = {}
        for s in self.sections:
            seen.setdefault(s.tracker, None)
        return list(seen)


@dataclass(frozen=True)
class RawComment:
    """A tracker comment before decomposition into sections."""

    author: str
    text: str
    created: str = ""
    comment_id: str = ""


@dataclass(frozen=True)
class RawIssue:
    """A fetched issue before decomposition into sections."""

    project: str
    tracker: str
    issue_id: str
    summary: str
    description: str | None
    comments: tuple[RawComment, ...] = ()
