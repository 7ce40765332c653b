"""Deterministic tokenizer shared by every consumer of section text."""

from __future__ import annotations

import re

# Lowercased alphanumeric runs, with internal apostrophes kept so
# contractions stay whole ("doesn't" is one token).  Everything else —
# punctuation runs, whitespace, markup — separates or disappears.
_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")
_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'"})


def tokenize(text: str) -> list[str]:
    """Split text into lowercased tokens; empty input gives an empty list."""
    return _TOKEN.findall(text.lower().translate(_APOSTROPHES))
