"""Issue-corpus handling: fetch, clean, decompose, persist."""

from .clean import (
    DEFAULT_CODE_PATTERNS,
    PatternConfigError,
    compile_patterns,
    decompose_issue,
    filter_bot_comments,
    identify_bot_candidates,
    strip_code_blocks,
)
from .io import (
    DATASET_FIELDS,
    DatasetFormatError,
    load_dataset,
    load_exclusions,
    load_raw_issues,
    save_dataset,
    save_exclusions,
    save_raw_issues,
)
from .trackers import (
    HttpCache,
    JiraClient,
    MalformedResponseError,
    MonorailClient,
    NetworkError,
    TrackerError,
    UnknownProjectError,
    fetch_issues,
    make_client,
)
from .types import (
    SATD_TYPE_INDICATORS,
    SATD_TYPES,
    SECTION_KINDS,
    TRACKERS,
    IssueSection,
    LabeledDataset,
    RawComment,
    RawIssue,
    SATDLabel,
)

__all__ = [
    "DATASET_FIELDS", "DEFAULT_CODE_PATTERNS", "DatasetFormatError", "HttpCache",
    "IssueSection", "JiraClient", "LabeledDataset", "MalformedResponseError",
    "MonorailClient", "NetworkError", "PatternConfigError", "RawComment", "RawIssue",
    "SATDLabel", "SATD_TYPES", "SATD_TYPE_INDICATORS", "SECTION_KINDS", "TRACKERS",
    "TrackerError", "UnknownProjectError", "compile_patterns", "decompose_issue",
    "fetch_issues", "filter_bot_comments", "identify_bot_candidates", "load_dataset",
    "load_exclusions", "load_raw_issues", "make_client", "save_dataset",
    "save_exclusions", "save_raw_issues",
    "strip_code_blocks",
]
