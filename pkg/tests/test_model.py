"""Domain type invariants and serialization round-trips."""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tierqa.model import (
    AnswerEnvelope,
    AugmentationRecord,
    Chunk,
    Document,
    EmbeddingVector,
    FaqEntry,
    FaqOrigin,
    RouterConfig,
    Tier,
    compose_final_text,
    content_id,
    new_id,
)


def make_chunk(**overrides):
    summary = overrides.pop("summary", "A summary sentence.")
    rewritten = overrides.pop("rewritten_text", "The rewritten body text.")
    fields = dict(
        id="chunk-1",
        parent_document_id="doc-1",
        ordinal=0,
        raw_text="raw",
        rewritten_text=rewritten,
        summary=summary,
        final_text=compose_final_text(summary, rewritten),
        embedding=EmbeddingVector([0.1, 0.2, 0.3]),
    )
    fields.update(overrides)
    return Chunk(**fields)


class TestEmbeddingVector:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            EmbeddingVector([1.0, float("nan")])
        with pytest.raises(ValueError):
            EmbeddingVector([float("inf"), 0.0])

    def test_immutable(self):
        vec = EmbeddingVector([1.0, 2.0])
        with pytest.raises(ValueError):
            vec.values[0] = 5.0

    def test_equality_and_hash(self):
        a = EmbeddingVector([1.0, 2.0])
        b = EmbeddingVector([1.0, 2.0])
        assert a == b and hash(a) == hash(b)
        assert a != EmbeddingVector([1.0, 2.1])

    def test_round_trip(self):
        vec = EmbeddingVector([0.5, -0.25, 1.0 / 3.0])
        assert EmbeddingVector(vec.to_list()) == vec

    def test_does_not_alias_caller_array(self):
        source = np.array([1.0, 2.0])
        vec = EmbeddingVector(source)
        source[0] = 9.0
        assert vec.values[0] == 1.0


class TestIds:
    def test_new_ids_unique_and_sortable(self):
        ids = [new_id() for _ in range(200)]
        assert len(set(ids)) == 200
        assert all(len(i) == 26 for i in ids)

    def test_content_id_deterministic(self):
        assert content_id("chunk", "a", "b") == content_id("chunk", "a", "b")
        assert content_id("chunk", "a", "b") != content_id("chunk", "ab", "")


class TestDocument:
    def test_requires_body(self):
        with pytest.raises(ValueError):
            Document(id="d1", title="t", body="   \n ")

    def test_round_trip_preserves_unknown_fields(self):
        doc = Document(
            id="d1",
            title="Title",
            body="Body text.",
            source_uri="s.md",
            ingested_at=datetime(2026, 1, 5, tzinfo=timezone.utc),
            extra={"reviewer": "amy"},
        )
        record = doc.to_dict()
        assert record["reviewer"] == "amy"
        assert Document.from_dict(record) == doc


class TestChunk:
    def test_final_text_composition_enforced(self):
        with pytest.raises(ValueError):
            make_chunk(final_text="not the composition")

    def test_ordinal_non_negative(self):
        with pytest.raises(ValueError):
            make_chunk(ordinal=-1)

    def test_round_trip(self):
        chunk = make_chunk(extra={"lang": "en"})
        assert Chunk.from_dict(chunk.to_dict()) == chunk


class TestFaqEntry:
    def test_paraphrase_needs_distinct_canonical(self):
        with pytest.raises(ValueError):
            FaqEntry(
                id="f1", question="q?", answer="a",
                origin=FaqOrigin.PARAPHRASE, canonical_id="f1",
            )

    def test_non_paraphrase_is_own_canonical(self):
        with pytest.raises(ValueError):
            FaqEntry(
                id="f1", question="q?", answer="a",
                origin=FaqOrigin.SEED, canonical_id="f2",
            )

    def test_round_trip_with_embedding(self):
        entry = FaqEntry(
            id="f1", question="q?", answer="a", origin=FaqOrigin.SEED,
            canonical_id="f1", question_embedding=EmbeddingVector([1.0, 0.0]),
            extra={"lang": "vi"},
        )
        assert FaqEntry.from_dict(entry.to_dict()) == entry


class TestRouterConfig:
    def test_defaults_match_tuned_values(self):
        config = RouterConfig()
        assert config.t_faq == 0.9
        assert config.k_faq == 20
        assert config.t_doc == 0.8
        assert config.k_doc == 2

    def test_threshold_bounds(self):
        with pytest.raises(ValueError):
            RouterConfig(t_faq=1.2)
        with pytest.raises(ValueError):
            RouterConfig(t_doc=-0.1)

    def test_disclaimers_non_empty_and_distinct(self):
        config = RouterConfig()
        assert config.disclaimer_tier2
        assert config.disclaimer_fallback
        assert config.disclaimer_tier2 != config.disclaimer_fallback
        with pytest.raises(ValueError):
            RouterConfig(disclaimer_tier2="")

    def test_round_trip(self):
        config = RouterConfig(t_faq=0.85, k_doc=3)
        assert RouterConfig.from_dict(config.to_dict()) == config


class TestAnswerEnvelope:
    def test_faq_tier_rejects_disclaimer(self):
        with pytest.raises(ValueError):
            AnswerEnvelope(
                query="q", answer_text="a", tier=Tier.FAQ,
                matches=(("f1", 0.95),), disclaimer_applied="warn",
                latency_ms=1.0,
            )

    def test_faq_tier_requires_matches(self):
        with pytest.raises(ValueError):
            AnswerEnvelope(
                query="q", answer_text="a", tier=Tier.FAQ,
                matches=(), disclaimer_applied=None, latency_ms=1.0,
            )

    def test_fallback_rejects_matches(self):
        with pytest.raises(ValueError):
            AnswerEnvelope(
                query="q", answer_text="a", tier=Tier.FALLBACK,
                matches=(("c1", 0.9),), disclaimer_applied="warn",
                latency_ms=1.0,
            )

    def test_document_requires_disclaimer(self):
        with pytest.raises(ValueError):
            AnswerEnvelope(
                query="q", answer_text="a", tier=Tier.DOCUMENT,
                matches=(("c1", 0.9),), disclaimer_applied=None,
                latency_ms=1.0,
            )

    def test_round_trip(self):
        envelope = AnswerEnvelope(
            query="q", answer_text="a", tier=Tier.DOCUMENT,
            matches=(("c1", 0.9), ("c2", 0.85)),
            disclaimer_applied="warn", latency_ms=12.5,
        )
        assert AnswerEnvelope.from_dict(envelope.to_dict()) == envelope


class TestAugmentationRecord:
    def test_round_trip(self):
        record = AugmentationRecord(
            document_id="d1", general_context="ctx", chunk_count=3,
            provider_call_log=(("context", "ab12", "cd34"),),
        )
        assert AugmentationRecord.from_dict(record.to_dict()) == record


@given(
    st.lists(
        st.floats(min_value=-100, max_value=100, allow_nan=False),
        min_size=1, max_size=32,
    )
)
def test_embedding_vector_round_trip_property(values):
    vec = EmbeddingVector(values)
    assert EmbeddingVector(vec.to_list()) == vec
