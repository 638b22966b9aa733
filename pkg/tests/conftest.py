"""Shared test fixtures: deterministic providers and the fixture corpus."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from tierqa.enrich import seed_entry
from tierqa.mocks import pipeline_generator
from tierqa.model import EmbeddingVector
from tierqa.providers import EmbedderSpec, MockEmbedder
from tierqa.store import ingest_documents

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


class StaticEmbedder:
    """Table-driven embedder for tests that need exact vectors per text.

    Unknown texts fall back to a deterministic mock of the same dimension.
    """

    def __init__(self, table: dict[str, list[float]], dimension: int):
        self.spec = EmbedderSpec(name="static", dimension=dimension, normalizes=False)
        self._table = {
            text: EmbeddingVector(values) for text, values in table.items()
        }
        self._fallback = MockEmbedder(dimension=dimension, seed=7)
        self.call_count = 0

    def embed(self, text: str) -> EmbeddingVector:
        self.call_count += 1
        hit = self._table.get(text)
        return hit if hit is not None else self._fallback.embed(text)


@pytest.fixture
def embedder64() -> MockEmbedder:
    return MockEmbedder(dimension=64, seed=0)


@pytest.fixture
def pipeline_gen():
    return pipeline_generator()


@pytest.fixture(scope="session")
def fixture_docs():
    return ingest_documents(FIXTURES / "corpus_docs")


@pytest.fixture(scope="session")
def seed_entries():
    entries = []
    with open(FIXTURES / "seed_faq.jsonl", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                entries.append(seed_entry(record["question"], record["answer"]))
    return entries
