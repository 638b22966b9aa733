"""Sentence splitting and embedding-driven chunk grouping.

Documents are split into sentences with light punctuation rules (no NLP
dependency), then adjacent sentences are grouped into chunks wherever the
embedding distance between neighbours stays below a per-document percentile
cutoff, so the number of chunks adapts to how much the content shifts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .index import cosine
from .providers import Embedder

DEFAULT_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "st", "no", "vs", "etc", "e.g",
        "i.e", "cf", "fig", "eq", "sec", "approx", "dept", "univ", "inc",
        "ltd", "co", "jr", "sr", "vol", "al", "p", "pp", "ext", "tel",
        "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
        "oct", "nov", "dec", "mon", "tue", "tues", "wed", "thu", "thurs",
        "fri", "sat", "sun",
    }
)

_BREAK_RE = re.compile(r"[.!?]+[\"'”’)\]]*\s+")
_PARAGRAPH_RE = re.compile(r"\n\s*\n")


@dataclass(frozen=True)
class ChunkerParams:
    breakpoint_percentile: float = 90.0
    min_sentences_per_chunk: int = 1
    max_chars_per_chunk: int = 1500

    def __post_init__(self) -> None:
        if not 0.0 < self.breakpoint_percentile < 100.0:
            raise ValueError("breakpoint_percentile must lie in (0, 100)")
        if self.min_sentences_per_chunk < 1:
            raise ValueError("min_sentences_per_chunk must be >= 1")
        if self.max_chars_per_chunk < 200:
            raise ValueError("max_chars_per_chunk must be >= 200")


def _word_before(text: str, position: int) -> str:
    """The whitespace-delimited token ending right before ``position``."""
    start = position
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:position].strip("\"'“‘([")


def _is_boundary(text: str, match: re.Match, abbreviations: frozenset[str]) -> bool:
    punct = match.group(0).strip()
    if not punct.startswith("."):
        return True  # ! and ? always end a sentence
    word = _word_before(text, match.start())
    bare = word.rstrip(".").lower()
    if bare in abbreviations:
        return False
    if len(bare) == 1 and word[:1].isupper():
        return False  # initials such as "J. Smith"
    tail = text[match.end():]
    if tail and not (tail[0].isupper() or tail[0].isdigit() or tail[0] in "\"'“‘(["):
        return False
    return True


def split_sentence_spans(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    """Segments whose concatenation equals the input exactly.

    Each segment carries its original trailing separator, so callers that
    need lossless reconstruction can join the spans back together.
    """
    if not text.strip():
        raise ValueError("cannot split empty text")
    cuts = [0]
    for match in _BREAK_RE.finditer(text):
        if _is_boundary(text, match, abbreviations):
            cuts.append(match.end())
    for match in _PARAGRAPH_RE.finditer(text):
        cuts.append(match.end())
    cuts = sorted(set(cuts))
    cuts.append(len(text))
    return [text[a:b] for a, b in zip(cuts, cuts[1:]) if a < b]


def split_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    """Trimmed sentences, in order; text without terminal punctuation is a
    single sentence."""
    return [
        span.strip()
        for span in split_sentence_spans(text, abbreviations)
        if span.strip()
    ]


def _split_oversize(
    group: list[int], gaps: np.ndarray, sentences: Sequence[str], max_chars: int
) -> list[list[int]]:
    """Recursively split a sentence-index group at its largest internal gap."""
    length = len(" ".join(sentences[i] for i in group))
    if length <= max_chars or len(group) < 2:
        return [group]
    internal = group[:-1]  # gap i sits between sentence i and i+1
    best = max(
        internal,
        key=lambda i: (gaps[i], -abs(internal.index(i) - (len(internal) - 1) / 2)),
    )
    cut = group.index(best) + 1
    left, right = group[:cut], group[cut:]
    return _split_oversize(left, gaps, sentences, max_chars) + _split_oversize(
        right, gaps, sentences, max_chars
    )


def chunk(
    sentences: Sequence[str], embedder: Embedder, params: ChunkerParams
) -> list[list[str]]:
    """Group adjacent sentences into chunks at embedding-distance breakpoints.

    Returns a partition of ``sentences``: every sentence appears exactly once
    and order is preserved. A boundary is placed between two sentences when
    their embedding distance (1 - cosine) strictly exceeds the document's
    ``breakpoint_percentile`` of all neighbour distances; chunks longer than
    ``max_chars_per_chunk`` are then split at their largest internal gap.
    """
    if not sentences:
        raise ValueError("need at least one sentence")
    if any(not s.strip() for s in sentences):
        raise ValueError("sentences must be non-empty")
    if len(sentences) == 1:
        return [list(sentences)]

    vectors = [embedder.embed(s) for s in sentences]
    gaps = np.array(
        [1.0 - cosine(vectors[i], vectors[i + 1]) for i in range(len(vectors) - 1)]
    )
    cutoff = float(np.percentile(gaps, params.breakpoint_percentile))

    groups: list[list[int]] = []
    current: list[int] = [0]
    for i in range(1, len(sentences)):
        gap_exceeds = gaps[i - 1] > cutoff
        if gap_exceeds and len(current) >= params.min_sentences_per_chunk:
            groups.append(current)
            current = [i]
        else:
            current.append(i)
    groups.append(current)

    sized: list[list[int]] = []
    for group in groups:
        sized.extend(
            _split_oversize(group, gaps, sentences, params.max_chars_per_chunk)
        )
    return [[sentences[i] for i in group] for group in sized]


def chunk_text(
    text: str, embedder: Embedder, params: ChunkerParams
) -> list[str]:
    """Convenience wrapper: split to sentences, group, join groups with spaces."""
    groups = chunk(split_sentences(text), embedder, params)
    return [" ".join(group) for group in groups]
