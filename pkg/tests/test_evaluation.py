"""Metrics, threshold sweeps against a re-ranking oracle, tier reports."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tierqa.evaluation import (
    Judgment,
    LabeledQuery,
    RankedResult,
    accuracy,
    format_tier_table,
    mrr,
    retrieval_reciprocal_rank,
    sweep_doc_threshold,
    sweep_faq_threshold,
    sweep_threshold,
    tier_report,
)
from tierqa.index import IndexEntry, build, cosine
from tierqa.model import AnswerEnvelope, EmbeddingVector, Tier
from tierqa.store import Store

from conftest import FIXTURES


class TestAccuracy:
    def test_all_correct(self):
        judgments = [Judgment(f"q{i}", True) for i in range(7)]
        assert accuracy(judgments) == 1.0

    def test_known_ratios(self):
        def ratio(correct: int, total: int = 500) -> float:
            return accuracy(
                [Judgment(f"q{i}", i < correct) for i in range(total)]
            )

        assert ratio(314) == pytest.approx(0.628, abs=1e-12)
        assert ratio(272) == pytest.approx(0.544, abs=1e-12)
        assert ratio(251) == pytest.approx(0.502, abs=1e-12)
        assert ratio(220) == pytest.approx(0.440, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy([])

    @given(st.lists(st.booleans(), min_size=1, max_size=50))
    def test_permutation_invariant(self, flags):
        judgments = [Judgment(f"q{i}", f) for i, f in enumerate(flags)]
        shuffled = judgments[:]
        random.Random(0).shuffle(shuffled)
        assert accuracy(judgments) == pytest.approx(accuracy(shuffled))


class TestMrr:
    def test_all_rank_one(self):
        assert mrr([RankedResult(f"q{i}", 1) for i in range(5)]) == 1.0

    def test_all_missing(self):
        assert mrr([RankedResult(f"q{i}", None) for i in range(5)]) == 0.0

    def test_mixed(self):
        results = [
            RankedResult("a", 1),
            RankedResult("b", 2),
            RankedResult("c", None),
        ]
        assert mrr(results) == pytest.approx(0.5, abs=1e-12)

    def test_rank_validation(self):
        with pytest.raises(ValueError):
            RankedResult("a", 0)

    @given(st.lists(st.one_of(st.none(), st.integers(1, 50)), min_size=1, max_size=40))
    def test_permutation_invariant(self, ranks):
        results = [RankedResult(f"q{i}", r) for i, r in enumerate(ranks)]
        shuffled = results[:]
        random.Random(1).shuffle(shuffled)
        assert mrr(results) == pytest.approx(mrr(shuffled))

    @given(
        st.lists(st.integers(1, 20), min_size=1, max_size=20),
        st.data(),
    )
    def test_non_increasing_when_rank_worsens(self, ranks, data):
        results = [RankedResult(f"q{i}", r) for i, r in enumerate(ranks)]
        index = data.draw(st.integers(0, len(ranks) - 1))
        worse = results[:]
        worse[index] = RankedResult(
            worse[index].query_id, worse[index].rank_of_first_relevant + 1
        )
        assert mrr(worse) <= mrr(results)


def planted_index(pairs: list[tuple[float, float]], block: int = 4):
    """One (relevant, distractor) cosine pair per query, in disjoint blocks.

    Query i is the unit vector of dimension block*len(pairs) pointing along
    axis block*i; its relevant entry sits at the first requested cosine and
    its distractor at the second, orthogonal to every other query's block.
    """
    m = block * len(pairs)
    queries: list[LabeledQuery] = []
    entries: list[IndexEntry] = []
    canonical: dict[str, str] = {}
    for i, (rel_score, dis_score) in enumerate(pairs):
        base = block * i
        q = np.zeros(m)
        q[base] = 1.0
        rel = np.zeros(m)
        rel[base] = rel_score
        rel[base + 1] = math.sqrt(1 - rel_score**2)
        dis = np.zeros(m)
        dis[base] = dis_score
        dis[base + 2] = math.sqrt(1 - dis_score**2)
        rel_key, dis_key = f"rel-{i}", f"dis-{i}"
        entries.append(IndexEntry(rel_key, EmbeddingVector(rel)))
        entries.append(IndexEntry(dis_key, EmbeddingVector(dis)))
        canonical[rel_key] = f"canon-{i}"
        canonical[dis_key] = f"other-{i}"
        queries.append(
            LabeledQuery(
                query_id=f"q{i}",
                vector=EmbeddingVector(q),
                relevant_ids=frozenset({f"canon-{i}"}),
            )
        )
    return queries, build(entries), canonical


def oracle_curve(queries, entries, canonical, low, high, step, top_k):
    """Independent re-ranking oracle: full sort at every threshold."""
    thresholds = [round(low + i * step, 10) for i in range(int(round((high - low) / step)) + 1)]
    curve = []
    for t in thresholds:
        total = 0.0
        for query in queries:
            scored = sorted(
                (
                    (-cosine(entry.vector, query.vector), entry.key)
                    for entry in entries
                ),
            )
            kept = [
                key for neg, key in scored if -neg >= t
            ][:top_k]
            if not kept:
                total += 1.0
            else:
                rr = 0.0
                for rank, key in enumerate(kept, start=1):
                    if canonical.get(key, key) in query.relevant_ids:
                        rr = 1.0 / rank
                        break
                total += rr
        curve.append((t, total / len(queries)))
    return curve


class TestSweep:
    def test_flat_curve_when_relevant_at_one(self):
        queries, index, canonical = planted_index([(1.0, 0.2)] * 4)
        result = sweep_faq_threshold(queries, index, canonical)
        assert result.best_threshold == 0.80
        assert all(score == pytest.approx(1.0) for _, score in result.curve)

    def test_curve_matches_reranking_oracle(self):
        # Relevant entries near 0.85, distractors near 0.95.
        queries, index, canonical = planted_index([(0.852, 0.948)] * 5)
        result = sweep_faq_threshold(queries, index, canonical)
        entries = index.entries()
        expected = oracle_curve(
            queries, entries, canonical, 0.80, 0.95, 0.01, 20
        )
        assert len(result.curve) == 16
        for (t_got, got), (t_exp, exp) in zip(result.curve, expected):
            assert t_got == pytest.approx(t_exp, abs=1e-12)
            assert got == pytest.approx(exp, abs=1e-12)
        # Below the relevant score the distractor outranks it; past it only
        # the distractor survives; past both the tier declines.
        by_t = dict(result.curve)
        assert by_t[0.80] == pytest.approx(0.5)
        assert by_t[0.9] == pytest.approx(0.0)
        assert by_t[0.95] == pytest.approx(1.0)

    def test_default_grid_is_sixteen_points(self):
        queries, index, canonical = planted_index([(0.9, 0.5)])
        result = sweep_faq_threshold(queries, index, canonical)
        assert [t for t, _ in result.curve] == [
            pytest.approx(0.80 + i * 0.01) for i in range(16)
        ]

    def test_ties_take_smallest_threshold(self):
        queries, index, canonical = planted_index([(0.999, 0.3)] * 2)
        result = sweep_faq_threshold(queries, index, canonical)
        assert result.best_threshold == 0.80

    def test_reproducible(self):
        queries, index, canonical = planted_index([(0.852, 0.948)] * 3)
        first = sweep_faq_threshold(queries, index, canonical)
        second = sweep_faq_threshold(queries, index, canonical)
        assert first == second

    def test_doc_sweep_shape(self):
        from tierqa.evaluation import DOC_SWEEP_TOP_K

        assert DOC_SWEEP_TOP_K == 2
        queries, index, _ = planted_index([(0.848, 0.932)] * 3)
        result = sweep_doc_threshold(
            [
                LabeledQuery(q.query_id, q.vector, frozenset({f"rel-{i}"}))
                for i, q in enumerate(queries)
            ],
            index,
        )
        by_t = dict(result.curve)
        # Distractor above the relevant chunk: rank 2 while both retrieved,
        # a wrong-only answer once the relevant is filtered, then a decline.
        assert by_t[0.80] == pytest.approx(0.5)
        assert by_t[0.90] == pytest.approx(0.0)
        assert by_t[0.94] == pytest.approx(1.0)
        assert result.best_threshold == pytest.approx(0.94)

    def test_empty_queries_rejected(self):
        _, index, _ = planted_index([(0.9, 0.5)])
        with pytest.raises(ValueError):
            sweep_threshold([], index, top_k=20)

    def test_decline_convention(self):
        assert retrieval_reciprocal_rank([], frozenset({"a"})) == 1.0
        assert retrieval_reciprocal_rank(["x"], frozenset({"a"})) == 0.0
        assert retrieval_reciprocal_rank(["x", "a"], frozenset({"a"})) == 0.5


class TestTierReport:
    def test_fixture_log_reproduces_published_counts(self):
        store = Store(FIXTURES)
        envelopes = store.load_envelopes(FIXTURES / "eval" / "tier_log_envelopes.jsonl")
        judgments = store.load_judgments(FIXTURES / "eval" / "tier_log_judgments.jsonl")
        report = tier_report(envelopes, judgments)
        assert report.totals == {"faq": 258, "document": 211, "fallback": 31}
        assert report.correct == {"faq": 211, "document": 98, "fallback": 5}

    def test_empty_log(self):
        report = tier_report([], [])
        assert report.total_responses == 0
        assert set(report.totals.values()) == {0}

    def test_missing_judgment_rejected(self):
        envelope = AnswerEnvelope(
            query="q1", answer_text="a", tier=Tier.FAQ,
            matches=(("f", 0.99),), disclaimer_applied=None, latency_ms=1.0,
        )
        with pytest.raises(ValueError):
            tier_report([envelope], [])

    @given(st.lists(st.sampled_from(list(Tier)), min_size=0, max_size=60))
    def test_totals_conservation(self, tiers):
        envelopes = []
        judgments = []
        for i, tier in enumerate(tiers):
            query = f"q{i}"
            if tier is Tier.FAQ:
                envelope = AnswerEnvelope(
                    query=query, answer_text="a", tier=tier,
                    matches=(("f", 0.99),), disclaimer_applied=None,
                    latency_ms=1.0,
                )
            elif tier is Tier.DOCUMENT:
                envelope = AnswerEnvelope(
                    query=query, answer_text="a", tier=tier,
                    matches=(("c", 0.9),), disclaimer_applied="w", latency_ms=1.0,
                )
            else:
                envelope = AnswerEnvelope(
                    query=query, answer_text="a", tier=tier,
                    matches=(), disclaimer_applied="w", latency_ms=1.0,
                )
            envelopes.append(envelope)
            judgments.append(Judgment(query, i % 2 == 0))
        report = tier_report(envelopes, judgments)
        assert report.total_responses == len(tiers)
        assert sum(report.correct.values()) == sum(1 for j in judgments if j.correct)

    def test_table_formatting(self):
        store = Store(FIXTURES)
        envelopes = store.load_envelopes(FIXTURES / "eval" / "tier_log_envelopes.jsonl")
        judgments = store.load_judgments(FIXTURES / "eval" / "tier_log_judgments.jsonl")
        table = format_tier_table(tier_report(envelopes, judgments))
        assert "faq" in table and "258" in table and "0.628" in table
