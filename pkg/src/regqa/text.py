"""Tokenization and rule-based sentence segmentation.

Both retrieval and scoring operate on the same primitive text views: a
lowercase letter/digit token stream for lexical matching, and a
deterministic sentence segmentation for sentence-level scoring. The
segmenter is intentionally rule-based so that identical input always
yields identical sentences on every platform.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

# Maximal runs of Unicode letters and digits (underscore excluded).
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Dotless lowercase forms that should not end a sentence when they
# precede a period ("e.g.", "Sec. 4", "No. 12", ...).
_ABBREVIATIONS = frozenset(
    {
        "e.g",
        "i.e",
        "etc",
        "cf",
        "vs",
        "v",
        "no",
        "nos",
        "art",
        "arts",
        "sec",
        "secs",
        "para",
        "paras",
        "ch",
        "pt",
        "pts",
        "fig",
        "figs",
        "mr",
        "mrs",
        "ms",
        "dr",
        "prof",
        "st",
        "inc",
        "ltd",
        "co",
        "corp",
        "dept",
        "reg",
        "regs",
        "approx",
    }
)

_TERMINALS = ".!?"
_CLOSERS = "\"')]}’”"
_OPENERS = "\"'([{‘“"


def tokenize(text: str) -> list[str]:
    """Lowercase letter/digit tokens of ``text`` in order of appearance."""
    return [m.group(0) for m in _WORD_RE.finditer(text.lower())]


def collapse_whitespace(text: str) -> str:
    """Collapse all whitespace runs to single spaces and trim the ends."""
    return " ".join(text.split())


class SentenceSource(Enum):
    """Where a segmented text came from; recorded on the split."""

    ANSWER = "ANSWER"
    PASSAGE = "PASSAGE"


@dataclass(frozen=True)
class SentenceSplit:
    """An ordered, non-empty list of non-empty sentences."""

    sentences: tuple[str, ...]
    source: SentenceSource = SentenceSource.ANSWER

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValueError("sentence split must contain at least one sentence")
        for s in self.sentences:
            if not s.strip():
                raise ValueError("sentence split must not contain empty sentences")


def _preceding_word(text: str, dot_index: int) -> str:
    """The maximal non-space run ending just before ``dot_index``."""
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:dot_index]


def _is_starter(ch: str) -> bool:
    return ch.isupper() or ch.isdigit() or ch in _OPENERS


def segment_sentences(
    text: str, source: SentenceSource = SentenceSource.ANSWER
) -> SentenceSplit:
    """Split ``text`` into sentences at terminal punctuation.

    Boundaries are placed after '.', '!' or '?' (plus any trailing
    closing quotes or brackets) when followed by whitespace and an
    uppercase letter, digit, or opening quote, or at end of text. Two
    guards suppress false boundaries on periods: a digit on both sides
    (decimals and dotted rule numbers such as "3.4.2") and a known
    abbreviation immediately before the period. Joining the returned
    sentences with single spaces reconstructs the input text modulo
    collapsed whitespace.
    """
    collapsed = collapse_whitespace(text)
    if not collapsed:
        raise ValueError("cannot segment empty or whitespace-only text")

    sentences: list[str] = []
    start = 0
    i = 0
    n = len(collapsed)
    while i < n:
        ch = collapsed[i]
        if ch not in _TERMINALS:
            i += 1
            continue
        if ch == ".":
            prev_ch = collapsed[i - 1] if i > 0 else ""
            next_ch = collapsed[i + 1] if i + 1 < n else ""
            if prev_ch.isdigit() and next_ch.isdigit():
                i += 1
                continue
            word = _preceding_word(collapsed, i).lstrip("".join(_OPENERS) + "(")
            if word.lower() in _ABBREVIATIONS:
                i += 1
                continue
        # Include any closing quotes or brackets in the sentence.
        j = i + 1
        while j < n and collapsed[j] in _CLOSERS:
            j += 1
        if j >= n:
            sentences.append(collapsed[start:j])
            start = j
            i = j
            continue
        if collapsed[j] == " " and j + 1 < n and _is_starter(collapsed[j + 1]):
            sentences.append(collapsed[start:j])
            start = j + 1
            i = j + 1
            continue
        i = j
    if start < n:
        sentences.append(collapsed[start:n])
    return SentenceSplit(tuple(sentences), source)
