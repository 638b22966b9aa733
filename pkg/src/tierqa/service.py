"""HTTP chat service: /v1/chat, /v1/stats, /v1/health and an admin reload.

The service holds an immutable retrieval snapshot plus mutable runtime state
(stats, answer cache). Request handling is concurrent; a reload builds a
fresh snapshot and swaps it in atomically. Identical questions against the
same snapshot produce identical answers, which the bounded answer cache
exploits to keep repeated questions cheap.
"""

from __future__ import annotations

import logging
import threading
import time
from collections import OrderedDict, deque
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import router as routing
from .mocks import mock_embedder, pipeline_generator
from .model import AnswerEnvelope, RouterConfig
from .providers import (
    Embedder,
    Generator,
    ProviderError,
    embedder_from_env,
    generator_from_env,
)
from .store import Store

logger = logging.getLogger(__name__)

CACHE_CAPACITY = 8192
LATENCY_SAMPLE_CAP = 100_000


class StatsCollector:
    """Thread-safe request counters; totals only ever grow."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._per_day: dict[str, int] = {}
        self._per_tier: dict[str, int] = {}
        self._latencies: deque[float] = deque(maxlen=LATENCY_SAMPLE_CAP)
        self.started_at = datetime.now(timezone.utc)

    def record(self, tier: str, latency_ms: float) -> None:
        day = datetime.now(timezone.utc).date().isoformat()
        with self._lock:
            self._per_day[day] = self._per_day.get(day, 0) + 1
            self._per_tier[tier] = self._per_tier.get(tier, 0) + 1
            self._latencies.append(latency_ms)

    @staticmethod
    def _percentile(samples: list[float], q: float) -> float:
        if not samples:
            return 0.0
        rank = max(1, int(-(-q / 100.0 * len(samples) // 1)))  # ceil, nearest-rank
        return samples[min(rank, len(samples)) - 1]

    def summary(self) -> dict:
        with self._lock:
            per_day = dict(self._per_day)
            per_tier = dict(self._per_tier)
            samples = sorted(self._latencies)
        return {
            "started_at": self.started_at.isoformat(),
            "interactions": per_day,
            "tiers": per_tier,
            "latency_ms": {
                "count": len(samples),
                "p50": self._percentile(samples, 50),
                "p90": self._percentile(samples, 90),
                "p99": self._percentile(samples, 99),
            },
        }


class AnswerCache:
    """Bounded LRU of query text -> envelope, valid for one snapshot."""

    def __init__(self, capacity: int = CACHE_CAPACITY):
        self._capacity = capacity
        self._lock = threading.Lock()
        self._entries: OrderedDict[str, AnswerEnvelope] = OrderedDict()

    def get(self, key: str) -> AnswerEnvelope | None:
        with self._lock:
            envelope = self._entries.get(key)
            if envelope is not None:
                self._entries.move_to_end(key)
            return envelope

    def put(self, key: str, envelope: AnswerEnvelope) -> None:
        with self._lock:
            self._entries[key] = envelope
            self._entries.move_to_end(key)
            while len(self._entries) > self._capacity:
                self._entries.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


@dataclass
class ServiceState:
    snapshot: routing.Snapshot
    config: RouterConfig
    generator: Generator
    embedder: Embedder
    stats: StatsCollector
    cache: AnswerCache
    providers_label: str = "mock"
    store_root: Path | None = None


def state_from_store(
    store: Store,
    mock_providers: bool,
    config: RouterConfig | None = None,
    mock_dimension: int | None = None,
) -> ServiceState:
    """Load a serving state from disk, with mock or env-configured providers."""
    documents = store.load_documents() if store.documents_path.exists() else []
    chunks = []
    if store.chunks_path.exists():
        documents, chunks, _ = store.load_corpus()
    faq = store.load_faq() if store.faq_path.exists() else []

    dimension = None
    if chunks:
        dimension = chunks[0].embedding.dimension
    elif faq and faq[0].question_embedding is not None:
        dimension = faq[0].question_embedding.dimension

    if mock_providers:
        embedder = mock_embedder(dimension or mock_dimension or 64)
        generator = pipeline_generator()
        label = "mock"
    else:
        maybe_embedder = embedder_from_env()
        maybe_generator = generator_from_env()
        if maybe_embedder is None or maybe_generator is None:
            raise ProviderError(
                "remote providers not configured; set TIERQA_EMBED_BASE_URL "
                "and TIERQA_GENERATE_BASE_URL or pass --mock-providers"
            )
        embedder, generator, label = maybe_embedder, maybe_generator, "remote"

    if config is None:
        config = (
            store.load_config() if store.config_path.exists() else RouterConfig()
        )
    snapshot = routing.build_snapshot(
        documents, chunks, faq, dimension=dimension or embedder.spec.dimension
    )
    return ServiceState(
        snapshot=snapshot,
        config=config,
        generator=generator,
        embedder=embedder,
        stats=StatsCollector(),
        cache=AnswerCache(),
        providers_label="mock" if mock_providers else label,
        store_root=store.root,
    )


class ChatRequest(BaseModel):
    question: str = ""


def _source_parent(state: ServiceState, key: str) -> str | None:
    chunk = state.snapshot.chunks.get(key)
    if chunk is not None:
        return chunk.parent_document_id
    entry = state.snapshot.faq_entries.get(key)
    if entry is not None:
        return entry.canonical_id
    return None


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="tierqa", version="1")
    app.state.service = state

    @app.post("/v1/chat")
    def chat(request: ChatRequest) -> dict:
        question = request.question.strip()
        if not question:
            raise HTTPException(status_code=400, detail="question must be non-empty")
        started = time.perf_counter()
        envelope = state.cache.get(question)
        if envelope is None:
            try:
                envelope = routing.answer(
                    question,
                    state.snapshot,
                    state.config,
                    state.generator,
                    state.embedder,
                )
            except ProviderError as exc:
                raise HTTPException(
                    status_code=503, detail=f"providers unavailable: {exc}"
                ) from exc
            state.cache.put(question, envelope)
        latency_ms = (time.perf_counter() - started) * 1000.0
        state.stats.record(envelope.tier.value, latency_ms)
        return {
            "answer": envelope.answer_text,
            "tier": envelope.tier.value,
            "sources": [
                {"id": key, "score": score, "parent": _source_parent(state, key)}
                for key, score in envelope.matches
            ],
            "disclaimer": envelope.disclaimer_applied,
            "latency_ms": latency_ms,
        }

    @app.get("/v1/stats")
    def stats() -> dict:
        summary = state.stats.summary()
        summary["documents"] = {
            doc_id: doc.title for doc_id, doc in state.snapshot.documents.items()
        }
        return summary

    @app.get("/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "ready": True,
            "faq_entries": len(state.snapshot.faq_entries),
            "chunks": len(state.snapshot.chunks),
            "documents": len(state.snapshot.documents),
            "providers": state.providers_label,
        }

    @app.post("/v1/admin/reload")
    def reload() -> dict:
        if state.store_root is None:
            raise HTTPException(status_code=400, detail="no store configured")
        fresh = state_from_store(
            Store(state.store_root),
            mock_providers=state.providers_label == "mock",
            config=None,
        )
        state.snapshot = fresh.snapshot
        state.config = fresh.config
        state.cache.clear()
        logger.info(
            "snapshot reloaded: %d faq entries, %d chunks",
            len(state.snapshot.faq_entries), len(state.snapshot.chunks),
        )
        return {
            "reloaded": True,
            "faq_entries": len(state.snapshot.faq_entries),
            "chunks": len(state.snapshot.chunks),
        }

    return app
