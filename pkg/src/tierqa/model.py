"""Core domain types shared by every other module.

All types are immutable after construction and validate their invariants
eagerly: constructing an instance that violates an invariant raises
``ValueError``. Each persisted type carries ``to_dict``/``from_dict`` so the
store can round-trip entities without losing unknown fields.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterator, Mapping

import numpy as np

# Separator between the summary line and the rewritten body inside a chunk's
# final text. A single newline keeps the summary recoverable as line one.
SUMMARY_SEPARATOR = "\n"

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def new_id(prefix: str = "") -> str:
    """Return a ULID-style sortable id: 48-bit ms timestamp + 80 random bits."""
    value = (int(time.time() * 1000) & (2**48 - 1)) << 80
    value |= int.from_bytes(os.urandom(10), "big")
    chars = []
    for _ in range(26):
        chars.append(_CROCKFORD[value & 31])
        value >>= 5
    body = "".join(reversed(chars))
    return f"{prefix}{body}" if prefix else body


def content_id(prefix: str, *parts: str) -> str:
    """Deterministic id derived from content, for idempotent re-ingest."""
    digest = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=16)
    return f"{prefix}-{digest.hexdigest()}"


def text_hash(text: str) -> str:
    """Short stable hash used in provider call logs."""
    return hashlib.blake2b(text.encode("utf-8"), digest_size=8).hexdigest()


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


class EmbeddingVector:
    """Fixed-length real vector produced by an embedding provider.

    Backed by a read-only numpy array; all entries must be finite.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Any):
        arr = np.array(values, dtype=np.float64, copy=True)
        _require(arr.ndim == 1, "embedding must be one-dimensional")
        _require(arr.size >= 1, "embedding must not be empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding contains non-finite entries")
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dimension(self) -> int:
        return int(self._values.size)

    def to_list(self) -> list[float]:
        return self._values.tolist()

    def __len__(self) -> int:
        return self.dimension

    def __iter__(self) -> Iterator[float]:
        return iter(self._values.tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self._values.shape == other._values.shape and bool(
            np.array_equal(self._values, other._values)
        )

    def __hash__(self) -> int:
        return hash(self._values.tobytes())

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dimension})"


class FaqOrigin(str, Enum):
    SEED = "seed"
    EXPANDED_FROM_SEED = "expanded_from_seed"
    GENERATED_FROM_CHUNK = "generated_from_chunk"
    PARAPHRASE = "paraphrase"


class Tier(str, Enum):
    FAQ = "faq"
    DOCUMENT = "document"
    FALLBACK = "fallback"


def _parse_timestamp(value: Any) -> datetime:
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    return datetime.fromisoformat(str(value))


@dataclass(frozen=True)
class Document:
    """An original corpus item, the unit the augmentation pipeline consumes."""

    id: str
    title: str
    body: str
    source_uri: str | None = None
    ingested_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc)
    )
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require(bool(self.id), "document id must be non-empty")
        _require(bool(self.body.strip()), "document body must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        record = {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "source_uri": self.source_uri,
            "ingested_at": self.ingested_at.isoformat(),
        }
        record.update(self.extra)
        return record

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "Document":
        known = {"id", "title", "body", "source_uri", "ingested_at"}
        return cls(
            id=record["id"],
            title=record.get("title", ""),
            body=record["body"],
            source_uri=record.get("source_uri"),
            ingested_at=_parse_timestamp(record["ingested_at"]),
            extra={k: v for k, v in record.items() if k not in known},
        )


def compose_final_text(summary: str, rewritten: str) -> str:
    """Final chunk text: summary line, separator, rewritten body."""
    return f"{summary}{SUMMARY_SEPARATOR}{rewritten}"


@dataclass(frozen=True)
class Chunk:
    """An augmented document segment; the retrievable unit of the document tier."""

    id: str
    parent_document_id: str
    ordinal: int
    raw_text: str
    rewritten_text: str
    summary: str
    final_text: str
    embedding: EmbeddingVector
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require(bool(self.id), "chunk id must be non-empty")
        _require(bool(self.parent_document_id), "chunk must reference a parent document")
        _require(self.ordinal >= 0, "chunk ordinal must be >= 0")
        _require(
            self.final_text == compose_final_text(self.summary, self.rewritten_text),
            "final_text must be summary + separator + rewritten_text",
        )

    def to_dict(self) -> dict[str, Any]:
        record = {
            "id": self.id,
            "parent_document_id": self.parent_document_id,
            "ordinal": self.ordinal,
            "raw_text": self.raw_text,
            "rewritten_text": self.rewritten_text,
            "summary": self.summary,
            "final_text": self.final_text,
            "embedding": self.embedding.to_list(),
        }
        record.update(self.extra)
        return record

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "Chunk":
        known = {
            "id", "parent_document_id", "ordinal", "raw_text",
            "rewritten_text", "summary", "final_text", "embedding",
        }
        return cls(
            id=record["id"],
            parent_document_id=record["parent_document_id"],
            ordinal=int(record["ordinal"]),
            raw_text=record["raw_text"],
            rewritten_text=record["rewritten_text"],
            summary=record["summary"],
            final_text=record["final_text"],
            embedding=EmbeddingVector(record["embedding"]),
            extra={k: v for k, v in record.items() if k not in known},
        )


@dataclass(frozen=True)
class FaqEntry:
    """A question-answer pair in the enriched FAQ set.

    Paraphrase entries point at their canonical entry via ``canonical_id`` and
    must share its answer byte-for-byte; non-paraphrases are their own
    canonical. ``source_ref`` links generated entries back to the chunk or
    FAQ entry they were derived from.
    """

    id: str
    question: str
    answer: str
    origin: FaqOrigin
    canonical_id: str
    source_ref: str | None = None
    question_embedding: EmbeddingVector | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _require(bool(self.id), "faq entry id must be non-empty")
        _require(bool(self.question.strip()), "faq question must be non-empty")
        _require(bool(self.canonical_id), "canonical_id must be non-empty")
        if self.origin is FaqOrigin.PARAPHRASE:
            _require(
                self.canonical_id != self.id,
                "paraphrase must reference a distinct canonical entry",
            )
        else:
            _require(
                self.canonical_id == self.id,
                "non-paraphrase entries are their own canonical",
            )

    @property
    def is_paraphrase(self) -> bool:
        return self.origin is FaqOrigin.PARAPHRASE

    def to_dict(self) -> dict[str, Any]:
        record = {
            "id": self.id,
            "question": self.question,
            "answer": self.answer,
            "origin": self.origin.value,
            "canonical_id": self.canonical_id,
            "source_ref": self.source_ref,
            "question_embedding": (
                self.question_embedding.to_list()
                if self.question_embedding is not None
                else None
            ),
        }
        record.update(self.extra)
        return record

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "FaqEntry":
        known = {
            "id", "question", "answer", "origin", "canonical_id",
            "source_ref", "question_embedding",
        }
        embedding = record.get("question_embedding")
        return cls(
            id=record["id"],
            question=record["question"],
            answer=record["answer"],
            origin=FaqOrigin(record["origin"]),
            canonical_id=record["canonical_id"],
            source_ref=record.get("source_ref"),
            question_embedding=(
                EmbeddingVector(embedding) if embedding is not None else None
            ),
            extra={k: v for k, v in record.items() if k not in known},
        )


DEFAULT_TIER2_DISCLAIMER = (
    "This answer was generated from retrieved documents and may contain errors."
)
DEFAULT_FALLBACK_DISCLAIMER = (
    "No relevant information was found; this answer is unverified."
)
DEFAULT_PROMPT_TEMPLATE = (
    "Answer the question using only the context below. If the context does "
    "not contain the answer, say so.\n\n"
    "CONTEXT:\n{context}\n\n"
    "QUESTION: {question}\n"
    "ANSWER:"
)


@dataclass(frozen=True)
class RouterConfig:
    """Thresholds, top-k limits, disclaimers and prompt shape for the router."""

    t_faq: float = 0.9
    t_doc: float = 0.8
    k_faq: int = 20
    k_doc: int = 2
    disclaimer_tier2: str = DEFAULT_TIER2_DISCLAIMER
    disclaimer_fallback: str = DEFAULT_FALLBACK_DISCLAIMER
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    max_prompt_chars: int = 4000

    def __post_init__(self) -> None:
        _require(0.0 <= self.t_faq <= 1.0, "t_faq must lie in [0, 1]")
        _require(0.0 <= self.t_doc <= 1.0, "t_doc must lie in [0, 1]")
        _require(self.k_faq >= 1, "k_faq must be >= 1")
        _require(self.k_doc >= 1, "k_doc must be >= 1")
        _require(bool(self.disclaimer_tier2), "tier-2 disclaimer must be non-empty")
        _require(bool(self.disclaimer_fallback), "fallback disclaimer must be non-empty")
        _require(self.max_prompt_chars >= 200, "max_prompt_chars unreasonably small")

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_faq": self.t_faq,
            "t_doc": self.t_doc,
            "k_faq": self.k_faq,
            "k_doc": self.k_doc,
            "disclaimer_tier2": self.disclaimer_tier2,
            "disclaimer_fallback": self.disclaimer_fallback,
            "prompt_template": self.prompt_template,
            "max_prompt_chars": self.max_prompt_chars,
        }

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "RouterConfig":
        defaults = cls()
        return cls(
            t_faq=float(record.get("t_faq", defaults.t_faq)),
            t_doc=float(record.get("t_doc", defaults.t_doc)),
            k_faq=int(record.get("k_faq", defaults.k_faq)),
            k_doc=int(record.get("k_doc", defaults.k_doc)),
            disclaimer_tier2=record.get("disclaimer_tier2", defaults.disclaimer_tier2),
            disclaimer_fallback=record.get(
                "disclaimer_fallback", defaults.disclaimer_fallback
            ),
            prompt_template=record.get("prompt_template", defaults.prompt_template),
            max_prompt_chars=int(
                record.get("max_prompt_chars", defaults.max_prompt_chars)
            ),
        )


@dataclass(frozen=True)
class AnswerEnvelope:
    """The router's final product: answer text plus tier and provenance."""

    query: str
    answer_text: str
    tier: Tier
    matches: tuple[tuple[str, float], ...]
    disclaimer_applied: str | None
    latency_ms: float

    def __post_init__(self) -> None:
        _require(self.latency_ms >= 0, "latency must be non-negative")
        if self.tier is Tier.FAQ:
            _require(self.disclaimer_applied is None, "faq answers carry no disclaimer")
            _require(len(self.matches) > 0, "faq answers must cite a match")
        elif self.tier is Tier.DOCUMENT:
            _require(
                bool(self.disclaimer_applied), "document answers carry a disclaimer"
            )
            _require(len(self.matches) > 0, "document answers must cite matches")
        else:
            _require(
                bool(self.disclaimer_applied), "fallback answers carry a disclaimer"
            )
            _require(len(self.matches) == 0, "fallback answers cite no matches")

    def to_dict(self) -> dict[str, Any]:
        return {
            "query": self.query,
            "answer_text": self.answer_text,
            "tier": self.tier.value,
            "matches": [[key, score] for key, score in self.matches],
            "disclaimer_applied": self.disclaimer_applied,
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "AnswerEnvelope":
        return cls(
            query=record["query"],
            answer_text=record["answer_text"],
            tier=Tier(record["tier"]),
            matches=tuple(
                (str(key), float(score)) for key, score in record.get("matches", [])
            ),
            disclaimer_applied=record.get("disclaimer_applied"),
            latency_ms=float(record.get("latency_ms", 0.0)),
        )


@dataclass(frozen=True)
class AugmentationRecord:
    """Per-document audit trail of the augmentation run."""

    document_id: str
    general_context: str
    chunk_count: int
    provider_call_log: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self) -> None:
        _require(bool(self.document_id), "record must reference a document")
        _require(self.chunk_count >= 0, "chunk_count must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "document_id": self.document_id,
            "general_context": self.general_context,
            "chunk_count": self.chunk_count,
            "provider_call_log": [list(entry) for entry in self.provider_call_log],
        }

    @classmethod
    def from_dict(cls, record: Mapping[str, Any]) -> "AugmentationRecord":
        return cls(
            document_id=record["document_id"],
            general_context=record["general_context"],
            chunk_count=int(record["chunk_count"]),
            provider_call_log=tuple(
                (str(a), str(b), str(c))
                for a, b, c in record.get("provider_call_log", [])
            ),
        )
