"""Tiered query routing: FAQ match, then retrieve-and-generate, then fallback.

Tier 1 searches the enriched FAQ by question similarity and, on a hit,
returns the stored answer verbatim without touching the generator. Tier 2
retrieves augmented chunks, builds one prompt, calls the generator exactly
once and appends the document-tier disclaimer. When neither tier finds
anything the generator answers the bare query under the fallback disclaimer.

``answer`` is stateless and reentrant over immutable snapshots.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .index import IndexEntry, VectorIndex, build
from .model import AnswerEnvelope, Chunk, Document, FaqEntry, RouterConfig, Tier
from .providers import Embedder, Generator, ProviderError

logger = logging.getLogger(__name__)

# Served when even the fallback generation fails; the fallback disclaimer is
# still appended so the caller can see the answer is unverified.
APOLOGY_TEXT = "Sorry, I cannot answer this question right now. Please try again later."

_DISCLAIMER_JOINT = "\n\n"


@dataclass(frozen=True)
class Snapshot:
    """Immutable retrieval state shared by concurrent requests."""

    faq_index: VectorIndex
    doc_index: VectorIndex
    faq_entries: Mapping[str, FaqEntry]
    chunks: Mapping[str, Chunk]
    documents: Mapping[str, Document] = field(default_factory=dict)


def build_snapshot(
    documents: Sequence[Document],
    chunks: Sequence[Chunk],
    faq_entries: Sequence[FaqEntry],
    *,
    dimension: int | None = None,
) -> Snapshot:
    """Index chunks and FAQ questions into a ready-to-serve snapshot."""
    missing = [e.id for e in faq_entries if e.question_embedding is None]
    if missing:
        raise ValueError(
            f"{len(missing)} FAQ entries lack question embeddings "
            f"(first: {missing[0]}); run enrichment first"
        )
    faq_index = build(
        [IndexEntry(e.id, e.question_embedding) for e in faq_entries],
        dimension=dimension,
    )
    doc_index = build(
        [IndexEntry(c.id, c.embedding) for c in chunks],
        dimension=dimension or (faq_index.dimension if faq_entries else None),
    )
    return Snapshot(
        faq_index=faq_index,
        doc_index=doc_index,
        faq_entries={e.id: e for e in faq_entries},
        chunks={c.id: c for c in chunks},
        documents={d.id: d for d in documents},
    )


def _with_disclaimer(text: str, disclaimer: str) -> str:
    return f"{text.rstrip()}{_DISCLAIMER_JOINT}{disclaimer}"


def build_prompt(
    query: str,
    chunk_texts: Sequence[str],
    template: str,
    max_chars: int = 4000,
) -> str:
    """Fill the prompt template with the query and retrieved texts.

    Texts must arrive in score order; when the assembled prompt exceeds
    ``max_chars`` the lowest-ranked text is trimmed (and dropped once empty)
    until the prompt fits. The query is never truncated.
    """
    if not chunk_texts:
        raise ValueError("tier-2 prompts require at least one retrieved chunk")
    texts = list(chunk_texts)
    while True:
        context = "\n\n".join(texts)
        prompt = template.replace("{context}", context).replace("{question}", query)
        if len(prompt) <= max_chars or not texts:
            return prompt
        overflow = len(prompt) - max_chars
        if len(texts[-1]) > overflow:
            texts[-1] = texts[-1][: len(texts[-1]) - overflow].rstrip()
            if texts[-1]:
                continue
        texts.pop()


def answer(
    query: str,
    snapshot: Snapshot,
    config: RouterConfig,
    generator: Generator,
    embedder: Embedder,
) -> AnswerEnvelope:
    """Route one query through the tiers and wrap the result.

    Embedding failures propagate (the request cannot be served); generation
    failures degrade: tier 2 falls back to the fallback path, and a fallback
    generation failure yields a static apology, still disclaimed.
    """
    started = time.perf_counter()
    trimmed = query.strip()
    if not trimmed:
        raise ValueError("query must be non-empty")

    query_vector = embedder.embed(trimmed)

    def latency() -> float:
        return (time.perf_counter() - started) * 1000.0

    faq_matches = snapshot.faq_index.search(query_vector, config.t_faq, config.k_faq)
    if faq_matches:
        top = faq_matches[0]
        entry = snapshot.faq_entries[top.key]
        return AnswerEnvelope(
            query=trimmed,
            answer_text=entry.answer,
            tier=Tier.FAQ,
            matches=((top.key, top.score),),
            disclaimer_applied=None,
            latency_ms=latency(),
        )

    doc_matches = snapshot.doc_index.search(query_vector, config.t_doc, config.k_doc)
    if doc_matches:
        texts = [snapshot.chunks[m.key].final_text for m in doc_matches]
        prompt = build_prompt(
            trimmed, texts, config.prompt_template, config.max_prompt_chars
        )
        try:
            response = generator.generate(prompt)
            return AnswerEnvelope(
                query=trimmed,
                answer_text=_with_disclaimer(response, config.disclaimer_tier2),
                tier=Tier.DOCUMENT,
                matches=tuple((m.key, m.score) for m in doc_matches),
                disclaimer_applied=config.disclaimer_tier2,
                latency_ms=latency(),
            )
        except ProviderError as exc:
            logger.warning("tier-2 generation failed, falling back: %s", exc)

    try:
        response = generator.generate(trimmed)
    except ProviderError as exc:
        logger.warning("fallback generation failed, serving apology: %s", exc)
        response = APOLOGY_TEXT
    return AnswerEnvelope(
        query=trimmed,
        answer_text=_with_disclaimer(response, config.disclaimer_fallback),
        tier=Tier.FALLBACK,
        matches=(),
        disclaimer_applied=config.disclaimer_fallback,
        latency_ms=latency(),
    )
