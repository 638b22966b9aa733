"""FAQ enrichment: expansion, mining, paraphrase fan-out, dedup, lineage."""

from __future__ import annotations

import pytest

from tierqa.augment import augment_corpus
from tierqa.enrich import (
    EnrichParams,
    enrich,
    expand_initial,
    generate_faq_from_chunk,
    normalize_question,
    paraphrase_entry,
    seed_entry,
)
from tierqa.mocks import pipeline_generator
from tierqa.model import FaqOrigin
from tierqa.providers import MockGenerator
from tierqa.store import check_references


def two_pair_expander() -> MockGenerator:
    def expand(prompt: str) -> str:
        marker = prompt.split("Q: ", 1)[1].split("\n", 1)[0][:12]
        return (
            f"Q: First spin-off about {marker}?\nA: Answer one.\n"
            f"Q: Second spin-off about {marker}?\nA: Answer two."
        )

    return MockGenerator(rules=[("additional related question-answer pairs", expand)])


@pytest.fixture
def fixture_chunks(fixture_docs, embedder64):
    chunks, _ = augment_corpus(fixture_docs, pipeline_generator(), embedder64)
    return chunks


class TestNormalizeQuestion:
    def test_case_whitespace_punctuation(self):
        assert normalize_question("  What IS   the fee?? ") == "what is the fee"
        assert normalize_question("What is the fee") == "what is the fee"


class TestExpandInitial:
    def test_empty_seed(self):
        assert expand_initial([], two_pair_expander()) == []

    def test_two_new_pairs_per_seed(self, seed_entries):
        seeds = seed_entries[:3]
        expanded = expand_initial(seeds, two_pair_expander())
        assert len(expanded) == 9  # 3 seeds + 3 * 2 generated

    def test_seeds_present_verbatim(self, seed_entries):
        expanded = expand_initial(seed_entries, two_pair_expander())
        for seed in seed_entries:
            assert seed in expanded

    def test_new_entries_lineage(self, seed_entries):
        expanded = expand_initial(seed_entries[:1], two_pair_expander())
        generated = [e for e in expanded if e.origin is FaqOrigin.EXPANDED_FROM_SEED]
        assert generated
        assert all(e.source_ref == seed_entries[0].id for e in generated)
        assert all(e.canonical_id == e.id for e in generated)

    def test_parse_failure_skips_seed(self, seed_entries):
        broken = MockGenerator(
            rules=[("additional related question-answer pairs", "garbage output")]
        )
        expanded = expand_initial(seed_entries[:2], broken)
        assert expanded == list(seed_entries[:2])


class TestGenerateFromChunk:
    def test_scripted_single_pair(self, fixture_chunks):
        generator = MockGenerator(
            rules=[("Extract question-answer pairs", "Q: q1?\nA: a1.")]
        )
        entries = generate_faq_from_chunk(fixture_chunks[0], generator)
        assert len(entries) == 1
        assert entries[0].question == "q1?"
        assert entries[0].answer == "a1."
        assert entries[0].origin is FaqOrigin.GENERATED_FROM_CHUNK
        assert entries[0].source_ref == fixture_chunks[0].id
        assert entries[0].canonical_id == entries[0].id

    def test_malformed_output_yields_empty(self, fixture_chunks, caplog):
        generator = MockGenerator(
            rules=[("Extract question-answer pairs", "not a pair at all")]
        )
        with caplog.at_level("WARNING"):
            entries = generate_faq_from_chunk(fixture_chunks[0], generator)
        assert entries == []
        assert any("skipped" in r.message for r in caplog.records)

    def test_thirty_entries_all_resolve(self, fixture_chunks):
        def three_pairs(prompt: str) -> str:
            stamp = str(abs(hash(prompt)) % 10_000)
            return "\n".join(
                f"Q: Mined question {stamp}-{i}?\nA: Mined answer {i}."
                for i in range(3)
            )

        generator = MockGenerator(
            rules=[("Extract question-answer pairs", three_pairs)]
        )
        chunks = fixture_chunks[:10]
        entries = [
            e for c in chunks for e in generate_faq_from_chunk(c, generator)
        ]
        assert len(entries) == 30
        assert check_references(chunks, entries) == []


class TestParaphraseEntry:
    def test_zero_variants(self, seed_entries):
        generator = MockGenerator()
        assert paraphrase_entry(seed_entries[0], 0, generator) == []
        assert generator.call_count == 0

    def test_verbatim_variant_dropped(self, seed_entries):
        entry = seed_entries[0]
        generator = MockGenerator(
            rules=[("different paraphrases", entry.question)]
        )
        assert paraphrase_entry(entry, 5, generator) == []

    def test_five_distinct_variants_share_answer_bytes(self, seed_entries):
        entry = seed_entries[0]
        generator = MockGenerator(
            rules=[
                (
                    "different paraphrases",
                    "\n".join(f"Variant {i} of the question?" for i in range(5)),
                )
            ]
        )
        variants = paraphrase_entry(entry, 5, generator)
        assert len(variants) == 5
        assert all(v.answer == entry.answer for v in variants)
        assert all(v.origin is FaqOrigin.PARAPHRASE for v in variants)
        assert all(v.canonical_id == entry.id for v in variants)

    def test_cap_at_n_variants(self, seed_entries):
        entry = seed_entries[1]
        generator = MockGenerator(
            rules=[
                (
                    "different paraphrases",
                    "\n".join(f"Way {i} to ask?" for i in range(10)),
                )
            ]
        )
        assert len(paraphrase_entry(entry, 4, generator)) == 4

    def test_paraphrasing_a_paraphrase_rejected(self, seed_entries):
        variants = paraphrase_entry(
            seed_entries[0], 1,
            MockGenerator(rules=[("different paraphrases", "Another way?")]),
        )
        with pytest.raises(ValueError):
            paraphrase_entry(variants[0], 1, MockGenerator())


class TestEnrich:
    def test_seeds_only_no_variants(self, seed_entries, embedder64):
        enriched = enrich([], seed_entries, MockGenerator(default=""), embedder64,
                          EnrichParams(n_variants=0))
        assert [e.id for e in enriched] == [e.id for e in seed_entries]
        assert all(e.question_embedding is not None for e in enriched)

    def test_duplicate_questions_deduplicated(self, fixture_chunks, embedder64):
        generator = MockGenerator(
            rules=[
                ("Extract question-answer pairs", "Q: Same question?\nA: a."),
                ("different paraphrases", ""),
                ("additional related question-answer pairs", ""),
            ]
        )
        enriched = enrich(
            fixture_chunks[:2], [], generator, embedder64, EnrichParams(n_variants=0)
        )
        assert len(enriched) == 1  # one survives across both chunks

    def test_paraphrase_fanout_multiplies_entries(self, seed_entries, embedder64):
        # 19 variants + the original gives the tier-1 top-k its headroom of 20.
        params = EnrichParams(n_variants=19)
        enriched = enrich(
            [], seed_entries, pipeline_generator(), embedder64, params
        )
        base = [e for e in enriched if not e.is_paraphrase]
        variants = [e for e in enriched if e.is_paraphrase]
        assert len(variants) == len(base) * 19
        assert len(enriched) == len(base) * 20

    def test_invariants_full_run(self, fixture_chunks, seed_entries, embedder64):
        enriched = enrich(
            fixture_chunks, seed_entries, pipeline_generator(), embedder64,
            EnrichParams(n_variants=3),
        )
        # superset of the seeds
        enriched_ids = {e.id for e in enriched}
        assert all(s.id in enriched_ids for s in seed_entries)
        # answer byte-integrity for paraphrases
        by_id = {e.id: e for e in enriched}
        for entry in enriched:
            if entry.is_paraphrase:
                assert entry.answer == by_id[entry.canonical_id].answer
        # provenance closure
        assert check_references(fixture_chunks, enriched) == []
        # no duplicate normalized questions
        keys = [normalize_question(e.question) for e in enriched]
        assert len(keys) == len(set(keys))
        # everything embedded
        assert all(e.question_embedding is not None for e in enriched)

    def test_expanded_seeds_count(self, seed_entries, embedder64):
        # pipeline mock expands every seed into 2 extra pairs
        enriched = enrich(
            [], seed_entries, pipeline_generator(), embedder64,
            EnrichParams(n_variants=0),
        )
        assert len(enriched) == len(seed_entries) * 3

    def test_seed_helper_roundtrip(self):
        entry = seed_entry("What time?", "Noon.")
        assert entry.origin is FaqOrigin.SEED
        assert entry.canonical_id == entry.id
