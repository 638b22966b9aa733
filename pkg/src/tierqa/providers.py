"""Embedding and generation providers.

Two implementations of each provider live here: deterministic in-process
mocks (pure functions, safe for tests and offline pipeline runs) and
HTTP-backed clients speaking the common JSON chat/embeddings protocol.
Callers depend only on the ``embed``/``generate``/``generate_structured``
surface, so the two are interchangeable.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np

from .model import EmbeddingVector

logger = logging.getLogger(__name__)

STRUCTURED_HINTS = ("qa_pairs", "paraphrases", "summary", "rewrite", "context")

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_MAX_INFLIGHT = 4

ENV_PREFIX = "TIERQA"


class ProviderError(Exception):
    """Base class for provider failures."""


class ProviderUnreachableError(ProviderError):
    """The remote endpoint could not be reached or kept failing."""


class TokenLimitError(ProviderError):
    """The prompt exceeded the provider's context window; truncate upstream."""


class StructuredOutputError(ProviderError):
    """Structured output stayed unparseable after the automatic retry."""


class DimensionMismatchError(ProviderError):
    """An embedding's length disagrees with the configured dimension."""


@dataclass(frozen=True)
class EmbedderSpec:
    name: str
    dimension: int
    normalizes: bool = True

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError("embedding dimension must be >= 2")


@dataclass(frozen=True)
class GeneratorSpec:
    name: str = "default"
    temperature: float = 0.9
    top_p: float = 0.95
    top_k: int = 40
    max_new_tokens: int = 512

    def __post_init__(self) -> None:
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError("top_p must lie in [0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


class Embedder(Protocol):
    spec: EmbedderSpec

    def embed(self, text: str) -> EmbeddingVector: ...


class Generator(Protocol):
    spec: GeneratorSpec

    def generate(self, prompt: str, spec: GeneratorSpec | None = None) -> str: ...

    def generate_structured(
        self, prompt: str, schema_hint: str
    ) -> list[str] | list[tuple[str, str]]: ...


# ---------------------------------------------------------------------------
# Structured-output parsing, shared by all generators
# ---------------------------------------------------------------------------


def parse_qa_pairs(text: str) -> list[tuple[str, str]]:
    """Parse ``Q: .. / A: ..`` line pairs; returns (question, answer) tuples."""
    pairs: list[tuple[str, str]] = []
    question: str | None = None
    answer_lines: list[str] = []

    def flush() -> None:
        nonlocal question, answer_lines
        if question and answer_lines:
            pairs.append((question.strip(), "\n".join(answer_lines).strip()))
        question = None
        answer_lines = []

    for line in text.splitlines():
        stripped = line.strip()
        if stripped.upper().startswith("Q:"):
            flush()
            question = stripped[2:].strip()
        elif stripped.upper().startswith("A:"):
            answer_lines = [stripped[2:].strip()]
        elif answer_lines and stripped:
            answer_lines.append(stripped)
    flush()
    return [(q, a) for q, a in pairs if q and a]


def parse_variants(text: str) -> list[str]:
    """One variant per line; leading bullets and numbering are stripped."""
    variants = []
    for line in text.splitlines():
        stripped = line.strip().lstrip("-*").strip()
        if stripped and stripped[0].isdigit():
            head, _, rest = stripped.partition(".")
            if head.isdigit() and rest.strip():
                stripped = rest.strip()
        if stripped:
            variants.append(stripped)
    return variants


class _StructuredMixin:
    """Implements generate_structured on top of a concrete generate()."""

    def generate_structured(
        self, prompt: str, schema_hint: str
    ) -> list[str] | list[tuple[str, str]]:
        if schema_hint not in STRUCTURED_HINTS:
            raise ValueError(f"unknown schema hint: {schema_hint!r}")
        last_error: str = ""
        for attempt in range(2):
            raw = self.generate(prompt)  # type: ignore[attr-defined]
            parsed, error = _parse_structured(raw, schema_hint)
            if error is None:
                return parsed
            last_error = error
            if attempt == 0:
                logger.warning(
                    "structured output parse failed (%s); retrying once", error
                )
        raise StructuredOutputError(last_error)


def _parse_structured(
    raw: str, schema_hint: str
) -> tuple[list[str] | list[tuple[str, str]], str | None]:
    stripped = raw.strip()
    if schema_hint == "qa_pairs":
        if not stripped:
            return [], None
        pairs = parse_qa_pairs(stripped)
        if not pairs:
            return [], "no Q:/A: pairs found in non-empty output"
        return pairs, None
    if schema_hint == "paraphrases":
        return parse_variants(stripped), None
    # summary / rewrite / context: single free-text record
    if not stripped:
        return [], "empty output for single-text schema"
    return [stripped], None


# ---------------------------------------------------------------------------
# Deterministic mocks
# ---------------------------------------------------------------------------

_P1 = np.uint64(0x9E3779B97F4A7C15)
_P2 = np.uint64(0xC2B2AE3D27D4EB4F)
_P3 = np.uint64(0x165667B19E3779F9)
_MIX = np.uint64(0xFF51AFD7ED558CCD)


class MockEmbedder:
    """Deterministic embedder: seeded 64-bit hashes of character trigrams,
    feature-hashed into m dimensions and unit-normalized.

    A pure function of (text, dimension, seed): the same text always maps to
    the same vector, and texts sharing trigrams get correlated vectors, which
    gives the chunker realistic similarity structure without a model.
    """

    def __init__(self, dimension: int = 64, seed: int = 0, normalizes: bool = True):
        self.spec = EmbedderSpec(
            name=f"mock-trigram-{dimension}d", dimension=dimension,
            normalizes=normalizes,
        )
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._lock = threading.Lock()
        self.call_count = 0

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        with self._lock:
            self.call_count += 1
        m = self.spec.dimension
        data = b"\x02" + text.encode("utf-8") + b"\x03"
        raw = np.frombuffer(data, dtype=np.uint8).astype(np.uint64)
        h = raw[:-2] * _P1 + raw[1:-1] * _P2 + raw[2:] * _P3 + self._seed
        h ^= h >> np.uint64(33)
        h *= _MIX
        h ^= h >> np.uint64(29)
        idx = (h % np.uint64(m)).astype(np.int64)
        signs = np.where((h >> np.uint64(63)) & np.uint64(1), -1.0, 1.0)
        vec = np.bincount(idx, weights=signs, minlength=m)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[int(h[0] % np.uint64(m))] = 1.0
            norm = 1.0
        if self.spec.normalizes:
            vec = vec / norm
        return EmbeddingVector(vec)


MockRule = tuple[str, "str | Callable[[str], str]"]


class MockGenerator(_StructuredMixin):
    """Scripted generator: first matching substring rule wins, echo by default.

    Rule responses may be callables receiving the full prompt, which lets
    pipeline tests derive deterministic outputs from their inputs. Prompts
    are recorded in ``calls`` for assertion.
    """

    def __init__(
        self,
        rules: Sequence[MockRule] | None = None,
        default: str | Callable[[str], str] | None = None,
        raise_on: str | None = None,
        spec: GeneratorSpec | None = None,
    ):
        self.spec = spec or GeneratorSpec(name="mock")
        self._rules = list(rules or [])
        self._default = default
        self._raise_on = raise_on
        self._lock = threading.Lock()
        self.call_count = 0
        self.calls: list[str] = []

    def generate(self, prompt: str, spec: GeneratorSpec | None = None) -> str:
        if not prompt:
            raise ValueError("cannot generate from an empty prompt")
        with self._lock:
            self.call_count += 1
            self.calls.append(prompt)
        if self._raise_on is not None and self._raise_on in prompt:
            raise ProviderUnreachableError("scripted failure")
        for pattern, response in self._rules:
            if pattern in prompt:
                return response(prompt) if callable(response) else response
        if self._default is not None:
            return self._default(prompt) if callable(self._default) else self._default
        return prompt  # echo


class FailingGenerator(_StructuredMixin):
    """Always raises; exercises fallback paths."""

    def __init__(self) -> None:
        self.spec = GeneratorSpec(name="failing")
        self.call_count = 0

    def generate(self, prompt: str, spec: GeneratorSpec | None = None) -> str:
        self.call_count += 1
        raise ProviderUnreachableError("generator configured to fail")


# ---------------------------------------------------------------------------
# HTTP-backed providers (JSON chat/embeddings protocol)
# ---------------------------------------------------------------------------


class _HttpBase:
    def __init__(
        self,
        base_url: str,
        api_key: str | None,
        timeout_s: float,
        max_inflight: int,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout_s,
            transport=transport,
        )
        self._inflight = threading.Semaphore(max_inflight)
        self._lock = threading.Lock()
        self.call_count = 0

    def _post(self, path: str, payload: dict) -> dict:
        with self._lock:
            self.call_count += 1
        last_exc: Exception | None = None
        for attempt in range(2):  # one retry on transient failure
            try:
                with self._inflight:
                    response = self._client.post(path, json=payload)
            except httpx.TransportError as exc:
                last_exc = exc
                time.sleep(0.2 * (attempt + 1))
                continue
            if response.status_code in (429, 500, 502, 503, 504):
                last_exc = ProviderUnreachableError(
                    f"{path} returned {response.status_code}"
                )
                time.sleep(0.2 * (attempt + 1))
                continue
            if response.status_code == 400 and "length" in response.text.lower():
                raise TokenLimitError(response.text[:200])
            if response.status_code >= 400:
                raise ProviderError(
                    f"{path} returned {response.status_code}: {response.text[:200]}"
                )
            return response.json()
        raise ProviderUnreachableError(str(last_exc))

    def close(self) -> None:
        self._client.close()


class HttpEmbedder(_HttpBase):
    """Client for a POST {base}/embeddings endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        dimension: int,
        api_key: str | None = None,
        normalizes: bool = False,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_inflight: int = DEFAULT_MAX_INFLIGHT,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(base_url, api_key, timeout_s, max_inflight, transport)
        self.spec = EmbedderSpec(name=model, dimension=dimension, normalizes=normalizes)
        self._model = model

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("cannot embed empty text")
        body = self._post("/embeddings", {"model": self._model, "input": text})
        values = body["data"][0]["embedding"]
        if len(values) != self.spec.dimension:
            raise DimensionMismatchError(
                f"provider returned {len(values)} dimensions, "
                f"expected {self.spec.dimension}"
            )
        return EmbeddingVector(values)


class HttpGenerator(_HttpBase, _StructuredMixin):
    """Client for a POST {base}/chat/completions endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        spec: GeneratorSpec | None = None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        max_inflight: int = DEFAULT_MAX_INFLIGHT,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(base_url, api_key, timeout_s, max_inflight, transport)
        self.spec = spec or GeneratorSpec(name=model)
        self._model = model

    def generate(self, prompt: str, spec: GeneratorSpec | None = None) -> str:
        if not prompt:
            raise ValueError("cannot generate from an empty prompt")
        effective = spec or self.spec
        body = self._post(
            "/chat/completions",
            {
                "model": self._model,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": effective.temperature,
                "top_p": effective.top_p,
                "max_tokens": effective.max_new_tokens,
            },
        )
        choices = body.get("choices") or []
        text = (choices[0].get("message", {}).get("content") or "") if choices else ""
        if not text.strip():
            raise ProviderError("provider returned an empty completion")
        return text


# ---------------------------------------------------------------------------
# Environment-based configuration
# ---------------------------------------------------------------------------


def _env(name: str) -> str | None:
    return os.environ.get(f"{ENV_PREFIX}_{name}")


def embedder_from_env() -> HttpEmbedder | None:
    """Build an HttpEmbedder from TIERQA_EMBED_* env vars, or None if unset."""
    base_url = _env("EMBED_BASE_URL")
    if not base_url:
        return None
    return HttpEmbedder(
        base_url=base_url,
        model=_env("EMBED_MODEL") or "default",
        dimension=int(_env("EMBED_DIMENSION") or "768"),
        api_key=_env("EMBED_API_KEY"),
        timeout_s=float(_env("PROVIDER_TIMEOUT") or DEFAULT_TIMEOUT_S),
        max_inflight=int(_env("PROVIDER_MAX_INFLIGHT") or DEFAULT_MAX_INFLIGHT),
    )


def generator_from_env(model: str | None = None) -> HttpGenerator | None:
    """Build an HttpGenerator from TIERQA_GENERATE_* env vars, or None if unset.

    ``model`` overrides the env model name, which lets callers configure
    per-purpose generators against the same endpoint.
    """
    base_url = _env("GENERATE_BASE_URL")
    if not base_url:
        return None
    return HttpGenerator(
        base_url=base_url,
        model=model or _env("GENERATE_MODEL") or "default",
        api_key=_env("GENERATE_API_KEY"),
        timeout_s=float(_env("PROVIDER_TIMEOUT") or DEFAULT_TIMEOUT_S),
        max_inflight=int(_env("PROVIDER_MAX_INFLIGHT") or DEFAULT_MAX_INFLIGHT),
    )
