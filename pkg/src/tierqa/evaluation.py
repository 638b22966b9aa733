"""Evaluation metrics, threshold sweeps and tier reporting.

``accuracy`` and ``mrr`` are the plain metrics over externally supplied
judgments and ranked results. The threshold sweeps score a labeled query set
against an index at every threshold on a grid and pick the threshold that
maximizes retrieval quality; ``tier_report`` breaks a batch of answers down
by tier with per-tier correctness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .index import VectorIndex
from .model import AnswerEnvelope, EmbeddingVector, Tier

DEFAULT_SWEEP_LOW = 0.80
DEFAULT_SWEEP_HIGH = 0.95
DEFAULT_SWEEP_STEP = 0.01
FAQ_SWEEP_TOP_K = 20
DOC_SWEEP_TOP_K = 2


@dataclass(frozen=True)
class Judgment:
    question_id: str
    correct: bool


@dataclass(frozen=True)
class RankedResult:
    """Rank of the first relevant retrieved item; None when none was found."""

    query_id: str
    rank_of_first_relevant: int | None

    def __post_init__(self) -> None:
        rank = self.rank_of_first_relevant
        if rank is not None and rank < 1:
            raise ValueError("rank must be a positive integer")


@dataclass(frozen=True)
class LabeledQuery:
    """A tuning query with its embedding and the ids counted as relevant."""

    query_id: str
    vector: EmbeddingVector
    relevant_ids: frozenset[str]


@dataclass(frozen=True)
class SweepResult:
    best_threshold: float
    curve: tuple[tuple[float, float], ...]  # (threshold, score) pairs


def accuracy(judgments: Sequence[Judgment]) -> float:
    """Fraction of judged questions answered correctly."""
    if not judgments:
        raise ValueError("accuracy needs at least one judgment")
    return sum(1 for j in judgments if j.correct) / len(judgments)


def mrr(results: Sequence[RankedResult]) -> float:
    """Mean reciprocal rank; a missing relevant item contributes zero."""
    if not results:
        raise ValueError("mrr needs at least one ranked result")
    total = sum(
        1.0 / r.rank_of_first_relevant
        for r in results
        if r.rank_of_first_relevant is not None
    )
    return total / len(results)


def _sweep_grid(low: float, high: float, step: float) -> list[float]:
    if not 0.0 <= low <= high <= 1.0:
        raise ValueError("sweep range must satisfy 0 <= low <= high <= 1")
    if step <= 0:
        raise ValueError("sweep step must be positive")
    count = int(round((high - low) / step))
    grid = [round(low + i * step, 10) for i in range(count + 1)]
    return [t for t in grid if t <= high + 1e-12]


def retrieval_reciprocal_rank(
    retrieved_keys: Sequence[str],
    relevant_ids: frozenset[str],
    key_mapper: Callable[[str], str] | None = None,
) -> float:
    """Reciprocal rank of a thresholded retrieval, scored tier-aware.

    1/rank of the first relevant result when one is retrieved; 0.0 when the
    tier would answer from irrelevant results only; 1.0 when nothing clears
    the threshold, because declining is the correct behaviour for a tiered
    router (the query falls through instead of being answered wrongly).
    """
    if not retrieved_keys:
        return 1.0
    for rank, key in enumerate(retrieved_keys, start=1):
        mapped = key_mapper(key) if key_mapper else key
        if mapped in relevant_ids:
            return 1.0 / rank
    return 0.0


def sweep_threshold(
    queries: Sequence[LabeledQuery],
    index: VectorIndex,
    *,
    low: float = DEFAULT_SWEEP_LOW,
    high: float = DEFAULT_SWEEP_HIGH,
    step: float = DEFAULT_SWEEP_STEP,
    top_k: int,
    key_mapper: Callable[[str], str] | None = None,
) -> SweepResult:
    """Score every threshold on the grid; best is the max, ties take the
    smallest threshold."""
    if not queries:
        raise ValueError("sweep needs at least one labeled query")
    curve: list[tuple[float, float]] = []
    best_t = low
    best_score = -math.inf
    for threshold in _sweep_grid(low, high, step):
        total = 0.0
        for query in queries:
            matches = index.search(query.vector, threshold, top_k)
            total += retrieval_reciprocal_rank(
                [m.key for m in matches], query.relevant_ids, key_mapper
            )
        score = total / len(queries)
        curve.append((threshold, score))
        if score > best_score:
            best_score = score
            best_t = threshold
    return SweepResult(best_threshold=best_t, curve=tuple(curve))


def sweep_faq_threshold(
    queries: Sequence[LabeledQuery],
    faq_index: VectorIndex,
    canonical_of: Mapping[str, str],
    *,
    low: float = DEFAULT_SWEEP_LOW,
    high: float = DEFAULT_SWEEP_HIGH,
    step: float = DEFAULT_SWEEP_STEP,
    top_k: int = FAQ_SWEEP_TOP_K,
) -> SweepResult:
    """FAQ-tier sweep: a hit is relevant when its canonical entry matches the
    query's labeled canonical id."""
    return sweep_threshold(
        queries,
        faq_index,
        low=low,
        high=high,
        step=step,
        top_k=top_k,
        key_mapper=lambda key: canonical_of.get(key, key),
    )


def sweep_doc_threshold(
    queries: Sequence[LabeledQuery],
    doc_index: VectorIndex,
    *,
    low: float = DEFAULT_SWEEP_LOW,
    high: float = DEFAULT_SWEEP_HIGH,
    step: float = DEFAULT_SWEEP_STEP,
    top_k: int = DOC_SWEEP_TOP_K,
) -> SweepResult:
    """Document-tier sweep; relevance is direct chunk-id membership."""
    return sweep_threshold(
        queries, doc_index, low=low, high=high, step=step, top_k=top_k
    )


@dataclass(frozen=True)
class TierReport:
    """Per-tier response totals and correct counts."""

    totals: Mapping[str, int]
    correct: Mapping[str, int]

    @property
    def total_responses(self) -> int:
        return sum(self.totals.values())

    def to_dict(self) -> dict:
        return {
            "totals": dict(self.totals),
            "correct": dict(self.correct),
        }


def tier_report(
    envelopes: Sequence[AnswerEnvelope], judgments: Sequence[Judgment]
) -> TierReport:
    """Break answers down by tier; judgments join on question_id == query."""
    by_id = {j.question_id: j for j in judgments}
    totals = {tier.value: 0 for tier in Tier}
    correct = {tier.value: 0 for tier in Tier}
    for envelope in envelopes:
        judgment = by_id.get(envelope.query)
        if judgment is None:
            raise ValueError(f"no judgment for query {envelope.query!r}")
        totals[envelope.tier.value] += 1
        if judgment.correct:
            correct[envelope.tier.value] += 1
    return TierReport(totals=totals, correct=correct)


def format_tier_table(report: TierReport) -> str:
    """Human-readable fixed-width table of a tier report."""
    lines = [f"{'tier':<10} {'total':>7} {'correct':>8} {'accuracy':>9}"]
    for tier in Tier:
        total = report.totals.get(tier.value, 0)
        right = report.correct.get(tier.value, 0)
        ratio = f"{right / total:.3f}" if total else "-"
        lines.append(f"{tier.value:<10} {total:>7} {right:>8} {ratio:>9}")
    lines.append(
        f"{'all':<10} {report.total_responses:>7} "
        f"{sum(report.correct.values()):>8} "
        + (
            f"{sum(report.correct.values()) / report.total_responses:>9.3f}"
            if report.total_responses
            else f"{'-':>9}"
        )
    )
    return "\n".join(lines)
