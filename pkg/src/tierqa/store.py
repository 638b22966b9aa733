"""Line-delimited persistence for corpora, FAQ sets, indexes and fixtures.

Every file starts with a header record carrying the schema kind, version and
(where vectors are involved) the embedding dimension; each following line is
one entity. Unknown fields on entities survive a load/save round-trip.
Writes are atomic (temp file + rename), so readers only ever see complete
snapshots. Loads validate referential integrity and report every violation
at once rather than stopping at the first.
"""

from __future__ import annotations

import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .index import IndexEntry, VectorIndex, build
from .model import (
    AnswerEnvelope,
    AugmentationRecord,
    Chunk,
    Document,
    EmbeddingVector,
    FaqEntry,
    RouterConfig,
    content_id,
)
from .evaluation import Judgment

SCHEMA_VERSION = 1


class StoreError(Exception):
    """Base class for persistence failures."""


class SchemaVersionError(StoreError):
    """The file carries an unsupported schema kind or version."""


class IntegrityError(StoreError):
    """Loaded data violates invariants; lists every violation found."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        preview = "; ".join(self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"{len(self.violations)} integrity violations: {preview}{more}")


def _atomic_write(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            for line in lines:
                handle.write(line)
                handle.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_jsonl(
    path: Path, kind: str, records: Iterable[Mapping[str, Any]],
    meta: Mapping[str, Any] | None = None,
) -> None:
    header: dict[str, Any] = {"schema": kind, "version": SCHEMA_VERSION}
    header.update(meta or {})
    _atomic_write(path, _jsonl_lines(header, records))


def _jsonl_lines(
    header: Mapping[str, Any], records: Iterable[Mapping[str, Any]]
) -> Iterable[str]:
    yield json.dumps(header, ensure_ascii=False, sort_keys=True)
    for record in records:
        yield json.dumps(record, ensure_ascii=False, sort_keys=True)


def read_jsonl(path: Path, kind: str) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    with open(path, encoding="utf-8") as handle:
        header_line = handle.readline()
        if not header_line.strip():
            raise StoreError(f"{path}: missing header record")
        header = json.loads(header_line)
        if header.get("schema") != kind:
            raise SchemaVersionError(
                f"{path}: expected schema {kind!r}, found {header.get('schema')!r}"
            )
        if header.get("version") != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"{path}: unsupported schema version {header.get('version')!r}"
            )
        records = [json.loads(line) for line in handle if line.strip()]
    return header, records


# ---------------------------------------------------------------------------
# Integrity validation
# ---------------------------------------------------------------------------


def validate_corpus(
    documents: Sequence[Document],
    chunks: Sequence[Chunk],
    records: Sequence[AugmentationRecord] | None = None,
    expected_dimension: int | None = None,
) -> list[str]:
    violations: list[str] = []
    doc_ids: set[str] = set()
    for doc in documents:
        if doc.id in doc_ids:
            violations.append(f"duplicate document id {doc.id}")
        doc_ids.add(doc.id)

    seen_positions: set[tuple[str, int]] = set()
    chunk_counts: dict[str, int] = {}
    for chunk in chunks:
        if chunk.parent_document_id not in doc_ids:
            violations.append(
                f"chunk {chunk.id} references missing document "
                f"{chunk.parent_document_id}"
            )
        position = (chunk.parent_document_id, chunk.ordinal)
        if position in seen_positions:
            violations.append(
                f"chunk {chunk.id} duplicates position {position}"
            )
        seen_positions.add(position)
        chunk_counts[chunk.parent_document_id] = (
            chunk_counts.get(chunk.parent_document_id, 0) + 1
        )
        if (
            expected_dimension is not None
            and chunk.embedding.dimension != expected_dimension
        ):
            violations.append(
                f"chunk {chunk.id} has {chunk.embedding.dimension}-dim "
                f"embedding, expected {expected_dimension}"
            )
    for record in records or []:
        actual = chunk_counts.get(record.document_id, 0)
        if record.chunk_count != actual:
            violations.append(
                f"augmentation record for {record.document_id} claims "
                f"{record.chunk_count} chunks, store has {actual}"
            )
    return violations


def validate_faq(
    entries: Sequence[FaqEntry], expected_dimension: int | None = None
) -> list[str]:
    violations: list[str] = []
    by_id: dict[str, FaqEntry] = {}
    for entry in entries:
        if entry.id in by_id:
            violations.append(f"duplicate faq id {entry.id}")
        by_id[entry.id] = entry
    for entry in entries:
        if (
            expected_dimension is not None
            and entry.question_embedding is not None
            and entry.question_embedding.dimension != expected_dimension
        ):
            violations.append(
                f"faq entry {entry.id} has "
                f"{entry.question_embedding.dimension}-dim embedding, "
                f"expected {expected_dimension}"
            )
        if not entry.is_paraphrase:
            continue
        canonical = by_id.get(entry.canonical_id)
        if canonical is None:
            violations.append(
                f"paraphrase {entry.id} references missing canonical "
                f"{entry.canonical_id}"
            )
            continue
        if canonical.is_paraphrase:
            violations.append(
                f"paraphrase {entry.id} chains through paraphrase "
                f"{canonical.id} (depth > 1)"
            )
        if canonical.answer != entry.answer:
            violations.append(
                f"paraphrase {entry.id} answer differs from canonical "
                f"{canonical.id}"
            )
    return violations


def check_references(
    chunks: Sequence[Chunk], entries: Sequence[FaqEntry]
) -> list[str]:
    """Cross-store sweep: every source_ref must resolve to a chunk or entry."""
    known = {c.id for c in chunks} | {e.id for e in entries}
    return [
        f"faq entry {entry.id} source_ref {entry.source_ref} does not resolve"
        for entry in entries
        if entry.source_ref is not None and entry.source_ref not in known
    ]


# ---------------------------------------------------------------------------
# Store rooted at a directory
# ---------------------------------------------------------------------------


class Store:
    """File layout rooted at a directory:

    corpus/documents.jsonl, corpus/chunks.jsonl,
    corpus/augmentation_records.jsonl, faq/entries.jsonl, faq/seed.jsonl,
    eval/judgments.jsonl, config.json
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def documents_path(self) -> Path:
        return self.root / "corpus" / "documents.jsonl"

    @property
    def chunks_path(self) -> Path:
        return self.root / "corpus" / "chunks.jsonl"

    @property
    def records_path(self) -> Path:
        return self.root / "corpus" / "augmentation_records.jsonl"

    @property
    def faq_path(self) -> Path:
        return self.root / "faq" / "entries.jsonl"

    @property
    def seed_faq_path(self) -> Path:
        return self.root / "faq" / "seed.jsonl"

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    @property
    def judgments_path(self) -> Path:
        return self.root / "eval" / "judgments.jsonl"

    # -- corpus ------------------------------------------------------------

    def save_documents(self, documents: Sequence[Document]) -> None:
        write_jsonl(
            self.documents_path, "tierqa/documents",
            (d.to_dict() for d in documents),
        )

    def load_documents(self) -> list[Document]:
        _, records = read_jsonl(self.documents_path, "tierqa/documents")
        return [Document.from_dict(r) for r in records]

    def save_corpus(
        self,
        documents: Sequence[Document],
        chunks: Sequence[Chunk],
        records: Sequence[AugmentationRecord] | None = None,
    ) -> None:
        self.save_documents(documents)
        dimension = chunks[0].embedding.dimension if chunks else None
        write_jsonl(
            self.chunks_path, "tierqa/chunks",
            (c.to_dict() for c in chunks),
            meta={"embedding_dimension": dimension},
        )
        if records is not None:
            write_jsonl(
                self.records_path, "tierqa/augmentation_records",
                (r.to_dict() for r in records),
            )

    def load_corpus(
        self, expected_dimension: int | None = None
    ) -> tuple[list[Document], list[Chunk], list[AugmentationRecord]]:
        documents = self.load_documents()
        chunks: list[Chunk] = []
        declared: int | None = None
        if self.chunks_path.exists():
            header, records = read_jsonl(self.chunks_path, "tierqa/chunks")
            declared = header.get("embedding_dimension")
            chunks = [Chunk.from_dict(r) for r in records]
        aug_records: list[AugmentationRecord] = []
        if self.records_path.exists():
            _, records = read_jsonl(
                self.records_path, "tierqa/augmentation_records"
            )
            aug_records = [AugmentationRecord.from_dict(r) for r in records]
        dimension = expected_dimension if expected_dimension is not None else declared
        violations = validate_corpus(
            documents, chunks, aug_records or None, dimension
        )
        if violations:
            raise IntegrityError(violations)
        return documents, chunks, aug_records

    # -- faq ----------------------------------------------------------------

    def save_faq(self, entries: Sequence[FaqEntry], path: Path | None = None) -> None:
        target = path or self.faq_path
        dimension = next(
            (
                e.question_embedding.dimension
                for e in entries
                if e.question_embedding is not None
            ),
            None,
        )
        write_jsonl(
            target, "tierqa/faq",
            (e.to_dict() for e in entries),
            meta={"embedding_dimension": dimension},
        )

    def load_faq(
        self, path: Path | None = None, expected_dimension: int | None = None
    ) -> list[FaqEntry]:
        target = path or self.faq_path
        header, records = read_jsonl(target, "tierqa/faq")
        entries = [FaqEntry.from_dict(r) for r in records]
        dimension = (
            expected_dimension
            if expected_dimension is not None
            else header.get("embedding_dimension")
        )
        violations = validate_faq(entries, dimension)
        if violations:
            raise IntegrityError(violations)
        return entries

    def save_seed_faq(self, entries: Sequence[FaqEntry]) -> None:
        self.save_faq(entries, path=self.seed_faq_path)

    def load_seed_faq(self) -> list[FaqEntry]:
        if not self.seed_faq_path.exists():
            return []
        return self.load_faq(path=self.seed_faq_path)

    # -- config / eval -------------------------------------------------------

    def save_config(self, config: RouterConfig) -> None:
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(
            self.config_path,
            [json.dumps(config.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)],
        )

    def load_config(self) -> RouterConfig:
        with open(self.config_path, encoding="utf-8") as handle:
            return RouterConfig.from_dict(json.load(handle))

    def save_judgments(
        self, judgments: Sequence[Judgment], path: Path | None = None
    ) -> None:
        write_jsonl(
            path or self.judgments_path, "tierqa/judgments",
            ({"question_id": j.question_id, "correct": j.correct} for j in judgments),
        )

    def load_judgments(self, path: Path | None = None) -> list[Judgment]:
        _, records = read_jsonl(path or self.judgments_path, "tierqa/judgments")
        return [
            Judgment(question_id=r["question_id"], correct=bool(r["correct"]))
            for r in records
        ]

    def save_envelopes(self, envelopes: Sequence[AnswerEnvelope], path: Path) -> None:
        write_jsonl(
            path, "tierqa/envelopes", (e.to_dict() for e in envelopes)
        )

    def load_envelopes(self, path: Path) -> list[AnswerEnvelope]:
        _, records = read_jsonl(path, "tierqa/envelopes")
        return [AnswerEnvelope.from_dict(r) for r in records]


# ---------------------------------------------------------------------------
# Index snapshots
# ---------------------------------------------------------------------------


def save_index_snapshot(index: VectorIndex, path: str | Path) -> None:
    write_jsonl(
        Path(path), "tierqa/index",
        (
            {"key": entry.key, "vector": entry.vector.to_list()}
            for entry in index.entries()
        ),
        meta={"embedding_dimension": index.dimension},
    )


def load_index_snapshot(
    path: str | Path, expected_dimension: int | None = None
) -> VectorIndex:
    header, records = read_jsonl(Path(path), "tierqa/index")
    declared = header.get("embedding_dimension")
    if (
        expected_dimension is not None
        and declared is not None
        and declared != expected_dimension
    ):
        raise IntegrityError(
            [
                f"index snapshot has dimension {declared}, "
                f"expected {expected_dimension}"
            ]
        )
    entries = [
        IndexEntry(key=r["key"], vector=EmbeddingVector(r["vector"]))
        for r in records
    ]
    return build(entries, dimension=declared)


# ---------------------------------------------------------------------------
# Document ingestion
# ---------------------------------------------------------------------------


def ingest_documents(docs_dir: str | Path) -> list[Document]:
    """Read *.txt / *.md files into Documents with content-derived ids.

    The first line is used as the title when it is a markdown heading,
    otherwise the file stem. ``ingested_at`` comes from the file mtime so
    re-ingesting unchanged files is byte-identical.
    """
    root = Path(docs_dir)
    if not root.is_dir():
        raise StoreError(f"not a directory: {root}")
    documents = []
    for path in sorted(root.rglob("*")):
        if path.suffix.lower() not in (".txt", ".md") or not path.is_file():
            continue
        body = path.read_text(encoding="utf-8")
        if not body.strip():
            continue
        first_line = body.lstrip().splitlines()[0].strip()
        title = (
            first_line.lstrip("#").strip()
            if first_line.startswith("#")
            else path.stem.replace("_", " ").replace("-", " ")
        )
        relative = path.relative_to(root).as_posix()
        documents.append(
            Document(
                id=content_id("doc", relative, body),
                title=title,
                body=body,
                source_uri=relative,
                ingested_at=datetime.fromtimestamp(
                    path.stat().st_mtime, tz=timezone.utc
                ),
            )
        )
    return documents
