"""Offline document augmentation: chunk, contextualize, rewrite, condense.

For every document the pipeline extracts one general context, then rewrites
each semantic chunk against that context, condenses the rewrite into a one
sentence summary, and stores summary + rewrite as the chunk's final text.
Chunk ids are content hashes, so re-running the pipeline over unchanged
inputs with deterministic providers reproduces the corpus byte for byte.

Per-chunk generation failures degrade to cheap fallbacks (identity rewrite,
first-sentence summary) instead of aborting the whole corpus build.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .chunking import ChunkerParams, chunk, split_sentences
from .model import (
    AugmentationRecord,
    Chunk,
    Document,
    compose_final_text,
    content_id,
    text_hash,
)
from .providers import Embedder, Generator, ProviderError

logger = logging.getLogger(__name__)

DEFAULT_COT_PREAMBLE = (
    "Work through the task carefully, then output only the final result."
)

CONTEXT_TEMPLATE = (
    "{cot}Read the document below and describe its overall context and "
    "themes in a short paragraph.\n\nTITLE: {title}\n\nDOCUMENT:\n{document}"
)
REWRITE_TEMPLATE = (
    "{cot}Rewrite the passage below so it reads as a standalone, "
    "self-contained text consistent with the overall context. Preserve every "
    "fact.\n\nOVERALL CONTEXT:\n{context}\n\nPASSAGE:\n{chunk}"
)
CONDENSE_TEMPLATE = (
    "{cot}Condense the following passage into exactly one sentence."
    "\n\nPASSAGE:\n{passage}"
)


class AugmentationError(RuntimeError):
    """A document produced no usable chunks."""


@dataclass(frozen=True)
class AugmentParams:
    cot_preamble: str = DEFAULT_COT_PREAMBLE
    context_template: str = CONTEXT_TEMPLATE
    rewrite_template: str = REWRITE_TEMPLATE
    condense_template: str = CONDENSE_TEMPLATE
    max_summary_chars: int = 300
    chunker: ChunkerParams = field(default_factory=ChunkerParams)
    max_workers: int = 4


class CallLog:
    """Collects (purpose, prompt hash, response hash) provider call records."""

    def __init__(self) -> None:
        self.entries: list[tuple[str, str, str]] = []

    def record(self, purpose: str, prompt: str, response: str) -> None:
        self.entries.append((purpose, text_hash(prompt), text_hash(response)))


def render_prompt(template: str, cot_preamble: str, **slots: str) -> str:
    cot = f"{cot_preamble}\n\n" if cot_preamble else ""
    return template.format(cot=cot, **slots)


def _pick(
    generators: Mapping[str, Generator] | None, purpose: str, default: Generator
) -> Generator:
    if generators and purpose in generators:
        return generators[purpose]
    return default


def extract_context(
    doc: Document,
    generator: Generator,
    params: AugmentParams = AugmentParams(),
    log: CallLog | None = None,
) -> str:
    """General context of a document; falls back to title + opening sentences."""
    prompt = render_prompt(
        params.context_template, params.cot_preamble,
        title=doc.title, document=doc.body,
    )
    try:
        context = generator.generate(prompt)
        if log is not None:
            log.record("context", prompt, context)
        return context
    except ProviderError as exc:
        logger.warning("context extraction failed for %s: %s", doc.id, exc)
        if log is not None:
            log.record("context", prompt, "")
        opening = " ".join(split_sentences(doc.body)[:2])
        return f"{doc.title}\n{opening}".strip()


def rewrite_chunk(
    raw: str,
    context: str,
    generator: Generator,
    params: AugmentParams = AugmentParams(),
    log: CallLog | None = None,
) -> str:
    """Context-guided rewrite of one raw chunk; identity fallback on failure."""
    if not raw.strip() or not context.strip():
        raise ValueError("raw chunk and context must be non-empty")
    prompt = render_prompt(
        params.rewrite_template, params.cot_preamble, context=context, chunk=raw
    )
    try:
        rewritten = generator.generate(prompt)
        if log is not None:
            log.record("rewrite", prompt, rewritten)
        return rewritten
    except ProviderError as exc:
        logger.warning("rewrite failed, keeping raw chunk: %s", exc)
        if log is not None:
            log.record("rewrite", prompt, "")
        return raw


def condense(
    rewritten: str,
    generator: Generator,
    params: AugmentParams = AugmentParams(),
    log: CallLog | None = None,
) -> str:
    """One-sentence summary of a rewritten chunk.

    The generator output is reduced to its first sentence and capped at
    ``max_summary_chars``; on failure the first sentence of the input is used.
    """
    if not rewritten.strip():
        raise ValueError("cannot condense empty text")
    prompt = render_prompt(
        params.condense_template, params.cot_preamble, passage=rewritten
    )
    try:
        response = generator.generate(prompt)
        if log is not None:
            log.record("condense", prompt, response)
        summary = split_sentences(response)[0]
    except ProviderError as exc:
        logger.warning("condense failed, using first sentence: %s", exc)
        if log is not None:
            log.record("condense", prompt, "")
        summary = split_sentences(rewritten)[0]
    return summary[: params.max_summary_chars].rstrip()


def augment_document(
    doc: Document,
    generator: Generator,
    embedder: Embedder,
    params: AugmentParams = AugmentParams(),
    generators: Mapping[str, Generator] | None = None,
) -> tuple[list[Chunk], AugmentationRecord]:
    """Run the full augmentation of one document.

    Returns the surviving chunks (ordinal = position among the raw chunks)
    and the audit record. Raises AugmentationError when no chunk survives.
    """
    log = CallLog()
    sentences = split_sentences(doc.body)
    raw_texts = [" ".join(group) for group in chunk(sentences, embedder, params.chunker)]
    context = extract_context(
        doc, _pick(generators, "context", generator), params, log
    )

    chunks: list[Chunk] = []
    for ordinal, raw in enumerate(raw_texts):
        rewritten = rewrite_chunk(
            raw, context, _pick(generators, "rewrite", generator), params, log
        )
        summary = condense(
            rewritten, _pick(generators, "condense", generator), params, log
        )
        final_text = compose_final_text(summary, rewritten)
        try:
            embedding = embedder.embed(final_text)
        except Exception as exc:
            logger.warning(
                "skipping chunk %d of %s: embedding failed (%s)",
                ordinal, doc.id, exc,
            )
            continue
        chunks.append(
            Chunk(
                id=content_id("chunk", doc.id, str(ordinal), final_text),
                parent_document_id=doc.id,
                ordinal=ordinal,
                raw_text=raw,
                rewritten_text=rewritten,
                summary=summary,
                final_text=final_text,
                embedding=embedding,
            )
        )
    if not chunks:
        raise AugmentationError(f"document {doc.id} produced no usable chunks")
    record = AugmentationRecord(
        document_id=doc.id,
        general_context=context,
        chunk_count=len(chunks),
        provider_call_log=tuple(log.entries),
    )
    return chunks, record


def augment_corpus(
    docs: Sequence[Document],
    generator: Generator,
    embedder: Embedder,
    params: AugmentParams = AugmentParams(),
    generators: Mapping[str, Generator] | None = None,
) -> tuple[list[Chunk], list[AugmentationRecord]]:
    """Augment every document; one record per document, chunks in input order.

    Documents are processed in parallel up to ``params.max_workers``; chunk
    steps within a document stay sequential because the rewrite depends on
    the document's context.
    """
    if not docs:
        return [], []
    with ThreadPoolExecutor(max_workers=max(1, params.max_workers)) as pool:
        results = list(
            pool.map(
                lambda d: augment_document(d, generator, embedder, params, generators),
                docs,
            )
        )
    all_chunks: list[Chunk] = []
    records: list[AugmentationRecord] = []
    for chunks, record in results:
        all_chunks.extend(chunks)
        records.append(record)
    return all_chunks, records
