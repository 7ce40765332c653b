"""Cleaning: bot-comment removal, code stripping, and issue decomposition."""

from __future__ import annotations

import re
from collections import Counter
from functools import lru_cache

from .types import IssueSection, RawIssue

# Default code-block patterns: wiki-markup fences ({code}/{noformat}),
# markdown triple-backtick fences, and runs of three or more consecutive
# indented lines (4+ spaces or a tab).  Replaceable via configuration.
DEFAULT_CODE_PATTERNS = (
    r"(?s)\{code(?::[^{}\n]*)?\}.*?\{code\}",
    r"(?s)\{noformat\}.*?\{noformat\}",
    r"(?s)```.*?```",
    r"(?m)^(?:(?:[ ]{4,}|\t)[^\n]*(?:\n|$)){3,}",
)


class PatternConfigError(ValueError):
    """A configured code-stripping pattern does not compile."""


@lru_cache(maxsize=32)
def compile_patterns(patterns: tuple[str, ...]):
    """Compile a pattern set once, failing fast on configuration errors."""
    compiled = []
    for pat in patterns:
        try:
            compiled.append(re.compile(pat))
        except re.error as exc:
            raise PatternConfigError(f"invalid code pattern {pat!r}: {exc}") from exc
    return tuple(compiled)


def strip_code_blocks(raw_text: str, patterns=None) -> str:
    """Delete every substring matching any pattern; idempotent by fixpoint.

    Deleting one block can butt two fragments together into a new match, so
    the pattern pass repeats until the text stops changing.  The loop
    terminates because each changing pass strictly shortens the text.
    """
    compiled = compile_patterns(tuple(patterns) if patterns is not None else DEFAULT_CODE_PATTERNS)
    text = raw_text
    while True:
        new = text
        for pat in compiled:
            new = pat.sub("", new)
        if new == text:
            return new
        text = new


def identify_bot_candidates(issues: list[RawIssue], top_k: int = 100) -> list[tuple[str, int]]:
    """Rank comment authors by volume as candidates for the bot allowlist.

    Sorted by descending comment count, ties broken lexicographically by
    username; at most ``top_k`` entries.  Empty usernames are skipped.
    """
    counts: Counter[str] = Counter()
    for issue in issues:
        for comment in issue.comments:
            if comment.author:
                counts[comment.author] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_k]


def filter_bot_comments(sections: list[IssueSection], bot_usernames) -> list[IssueSection]:
    """Drop comment sections authored by known bots; keep everything else.

    Summaries and descriptions are retained even when their author matches,
    and relative order is preserved.
    """
    bots = set(bot_usernames)
    return [s for s in sections if s.kind != "comment" or s.author not in bots]


def decompose_issue(issue: RawIssue, patterns=None, exclusions: list | None = None,
                    issue_author: str = "") -> list[IssueSection]:
    """Split a raw issue into summary/description/comment sections.

    Issues without a summary are not decomposed; they are appended to the
    ``exclusions`` list (as ``{"issue_id", "reason"}`` records) when one is
    supplied, and an empty list is returned.
    """
    if not issue.summary or not issue.summary.strip():
        if exclusions is not None:
            exclusions.append({"issue_id": issue.issue_id, "reason": "missing summary"})
        return []

    def section(kind: str, position: int, author: str, raw: str) -> IssueSection:
        return IssueSection(
            project=issue.project,
            tracker=issue.tracker,
            issue_id=issue.issue_id,
            kind=kind,
            position=position,
            author=author,
            text=strip_code_blocks(raw, patterns),
            raw_text=raw,
        )

    sections = [section("summary", 0, issue_author, issue.summary)]
    if issue.description is not None and issue.description.strip():
        sections.append(section("description", 0, issue_author, issue.description))
    ordered = sorted(enumerate(issue.comments),
                     key=lambda ic: (ic[1].created, ic[1].comment_id, ic[0]))
    for ordinal, (_, comment) in enumerate(ordered):
        sections.append(section("comment", ordinal, comment.author, comment.text))
    return sections
