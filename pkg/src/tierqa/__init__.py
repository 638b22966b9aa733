"""Two-tier retrieval QA engine.

Tier 1 answers from an enriched FAQ by question similarity, tier 2 retrieves
augmented document chunks and generates a disclaimed answer, and a disclaimed
direct-generation fallback covers everything else. Offline pipelines build
the augmented corpus and the enriched FAQ; an HTTP service and CLI expose the
router.
"""

from .model import (
    AnswerEnvelope,
    AugmentationRecord,
    Chunk,
    Document,
    EmbeddingVector,
    FaqEntry,
    FaqOrigin,
    RouterConfig,
    Tier,
)
from .router import Snapshot, answer, build_snapshot

__version__ = "0.1.0"

__all__ = [
    "AnswerEnvelope",
    "AugmentationRecord",
    "Chunk",
    "Document",
    "EmbeddingVector",
    "FaqEntry",
    "FaqOrigin",
    "RouterConfig",
    "Snapshot",
    "Tier",
    "answer",
    "build_snapshot",
    "__version__",
]
