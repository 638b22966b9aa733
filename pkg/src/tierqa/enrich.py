"""Offline FAQ enrichment: seed expansion, Q-A mining, paraphrase fan-out.

The enriched FAQ set is the union of the seed entries, extra pairs generated
from each seed, pairs mined from every augmented chunk, and paraphrase
variants of all of the above. Paraphrases share their canonical entry's
answer byte for byte and point back to it, so the exact-answer tier can
always serve a vetted answer and curators can audit where a question came
from. Only the pre-paraphrase snapshot is paraphrased: no paraphrases of
paraphrases.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .augment import DEFAULT_COT_PREAMBLE, render_prompt
from .model import Chunk, FaqEntry, FaqOrigin, content_id
from .providers import Embedder, Generator, ProviderError, StructuredOutputError

logger = logging.getLogger(__name__)

EXPAND_TEMPLATE = (
    "{cot}Here is a frequently asked question with its answer. Write "
    "additional related question-answer pairs a prospective student might "
    "ask, formatted as lines of 'Q: ...' and 'A: ...'.\n\n"
    "Q: {question}\nA: {answer}"
)
QA_FROM_CHUNK_TEMPLATE = (
    "{cot}Extract question-answer pairs from the passage below. Format each "
    "as a line 'Q: ...' followed by a line 'A: ...'.\n\nPASSAGE:\n{passage}"
)
PARAPHRASE_TEMPLATE = (
    "{cot}Write {n} different paraphrases of the question below, one per "
    "line. Keep the meaning identical.\n\nQUESTION: {question}"
)

_WHITESPACE_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class EnrichParams:
    n_variants: int = 19
    cot_preamble: str = DEFAULT_COT_PREAMBLE
    expand_template: str = EXPAND_TEMPLATE
    qa_template: str = QA_FROM_CHUNK_TEMPLATE
    paraphrase_template: str = PARAPHRASE_TEMPLATE
    max_workers: int = 4


def normalize_question(question: str) -> str:
    """Dedup key: lowercase, collapsed whitespace, no terminal punctuation."""
    collapsed = _WHITESPACE_RE.sub(" ", question).strip().lower()
    return collapsed.rstrip(".!?…").strip()


def seed_entry(question: str, answer: str, entry_id: str | None = None) -> FaqEntry:
    """Construct a seed FAQ entry with a content-derived id."""
    entry_id = entry_id or content_id("faq", "seed", question, answer)
    return FaqEntry(
        id=entry_id,
        question=question,
        answer=answer,
        origin=FaqOrigin.SEED,
        canonical_id=entry_id,
    )


def expand_initial(
    seed: Sequence[FaqEntry],
    generator: Generator,
    params: EnrichParams = EnrichParams(),
) -> list[FaqEntry]:
    """Seed entries plus generated companions; always a superset of the seed."""
    expanded: list[FaqEntry] = list(seed)
    for entry in seed:
        prompt = render_prompt(
            params.expand_template, params.cot_preamble,
            question=entry.question, answer=entry.answer,
        )
        try:
            pairs = generator.generate_structured(prompt, "qa_pairs")
        except (StructuredOutputError, ProviderError) as exc:
            logger.warning("seed expansion skipped for %s: %s", entry.id, exc)
            continue
        for question, answer in pairs:
            new_id = content_id("faq", "expanded", entry.id, question, answer)
            expanded.append(
                FaqEntry(
                    id=new_id,
                    question=question,
                    answer=answer,
                    origin=FaqOrigin.EXPANDED_FROM_SEED,
                    canonical_id=new_id,
                    source_ref=entry.id,
                )
            )
    return expanded


def generate_faq_from_chunk(
    chunk: Chunk,
    generator: Generator,
    params: EnrichParams = EnrichParams(),
) -> list[FaqEntry]:
    """Mine Q-A pairs from one chunk; unparseable output yields an empty list."""
    prompt = render_prompt(
        params.qa_template, params.cot_preamble, passage=chunk.final_text
    )
    try:
        pairs = generator.generate_structured(prompt, "qa_pairs")
    except (StructuredOutputError, ProviderError) as exc:
        logger.warning("Q-A mining skipped for chunk %s: %s", chunk.id, exc)
        return []
    entries = []
    for question, answer in pairs:
        new_id = content_id("faq", "chunk", chunk.id, question, answer)
        entries.append(
            FaqEntry(
                id=new_id,
                question=question,
                answer=answer,
                origin=FaqOrigin.GENERATED_FROM_CHUNK,
                canonical_id=new_id,
                source_ref=chunk.id,
            )
        )
    return entries


def paraphrase_entry(
    entry: FaqEntry,
    n_variants: int,
    generator: Generator,
    params: EnrichParams = EnrichParams(),
) -> list[FaqEntry]:
    """Up to ``n_variants`` paraphrases of a canonical entry.

    Variants that normalize to the original question (or to each other) are
    dropped; every variant shares the entry's answer byte for byte.
    """
    if entry.is_paraphrase:
        raise ValueError("paraphrase entries are not paraphrased again")
    if n_variants <= 0:
        return []
    prompt = render_prompt(
        params.paraphrase_template, params.cot_preamble,
        n=str(n_variants), question=entry.question,
    )
    try:
        raw_variants = generator.generate_structured(prompt, "paraphrases")
    except (StructuredOutputError, ProviderError) as exc:
        logger.warning("paraphrasing skipped for %s: %s", entry.id, exc)
        return []
    seen = {normalize_question(entry.question)}
    variants: list[FaqEntry] = []
    for text in raw_variants:
        key = normalize_question(text)
        if not key or key in seen:
            continue
        seen.add(key)
        variants.append(
            FaqEntry(
                id=content_id("faq", "para", entry.id, text),
                question=text,
                answer=entry.answer,
                origin=FaqOrigin.PARAPHRASE,
                canonical_id=entry.id,
                source_ref=entry.id,
            )
        )
        if len(variants) >= n_variants:
            break
    return variants


def _dedup(entries: Sequence[FaqEntry]) -> list[FaqEntry]:
    seen: set[str] = set()
    kept = []
    for entry in entries:
        key = normalize_question(entry.question)
        if key in seen:
            continue
        seen.add(key)
        kept.append(entry)
    return kept


def enrich(
    chunks: Sequence[Chunk],
    seed: Sequence[FaqEntry],
    generator: Generator,
    embedder: Embedder,
    params: EnrichParams = EnrichParams(),
) -> list[FaqEntry]:
    """Full enrichment: expand, mine, dedup, paraphrase, dedup, embed.

    The result is a superset of the (distinct-question) seed entries, has no
    two entries sharing a normalized question, and every entry carries a
    question embedding.
    """
    base = expand_initial(seed, generator, params)
    workers = max(1, params.max_workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        mined = pool.map(
            lambda c: generate_faq_from_chunk(c, generator, params), chunks
        )
        for entries in mined:
            base.extend(entries)
    base = _dedup(base)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        variant_lists = list(
            pool.map(
                lambda e: paraphrase_entry(e, params.n_variants, generator, params),
                base,
            )
        )
    enriched = _dedup(base + [v for vs in variant_lists for v in vs])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        embeddings = list(pool.map(lambda e: embedder.embed(e.question), enriched))
    return [
        replace(entry, question_embedding=embedding)
        for entry, embedding in zip(enriched, embeddings)
    ]
