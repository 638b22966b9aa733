"""Operator CLI: ingest, augment, enrich, tune, eval, ask, serve."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import uvicorn

from .augment import AugmentParams, augment_corpus
from .enrich import EnrichParams, enrich, seed_entry
from .evaluation import (
    LabeledQuery,
    accuracy,
    format_tier_table,
    sweep_doc_threshold,
    sweep_faq_threshold,
    tier_report,
)
from .mocks import mock_embedder, pipeline_generator
from .model import RouterConfig
from .providers import ProviderError, embedder_from_env, generator_from_env
from . import router as routing
from .service import create_app, state_from_store
from .store import Store, check_references, ingest_documents, write_jsonl

logger = logging.getLogger(__name__)

TUNE_QUERY_CAP = 500


def _resolve_providers(mock: bool, dimension: int):
    if mock:
        return mock_embedder(dimension), pipeline_generator()
    embedder = embedder_from_env()
    generator = generator_from_env()
    if embedder is None or generator is None:
        raise click.ClickException(
            "remote providers not configured; set TIERQA_EMBED_BASE_URL and "
            "TIERQA_GENERATE_BASE_URL, or pass --mock-providers"
        )
    return embedder, generator


def _load_config(store: Store, config_path: str | None) -> RouterConfig:
    if config_path:
        with open(config_path, encoding="utf-8") as handle:
            return RouterConfig.from_dict(json.load(handle))
    if store.config_path.exists():
        return store.load_config()
    return RouterConfig()


@click.group()
@click.option(
    "--store-dir", default="./store", show_default=True,
    help="Root directory of the persistent store.",
)
@click.option("--config", "config_path", default=None, help="Router config JSON.")
@click.pass_context
def main(ctx: click.Context, store_dir: str, config_path: str | None) -> None:
    """Two-tier retrieval QA engine."""
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    ctx.obj = {"store": Store(store_dir), "config_path": config_path}


@main.command()
@click.argument("docs_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def ingest(obj: dict, docs_dir: str) -> None:
    """Read text documents from DOCS_DIR into the store."""
    store: Store = obj["store"]
    documents = ingest_documents(docs_dir)
    if not documents:
        raise click.ClickException(f"no .txt/.md documents found under {docs_dir}")
    store.save_documents(documents)
    click.echo(f"ingested {len(documents)} documents into {store.documents_path}")


@main.command()
@click.option("--mock-providers", is_flag=True, help="Use deterministic in-process providers.")
@click.option("--dimension", default=64, show_default=True, help="Mock embedding dimension.")
@click.pass_obj
def augment(obj: dict, mock_providers: bool, dimension: int) -> None:
    """Chunk, rewrite and condense every ingested document."""
    store: Store = obj["store"]
    documents = store.load_documents()
    embedder, generator = _resolve_providers(mock_providers, dimension)
    chunks, records = augment_corpus(documents, generator, embedder, AugmentParams())
    store.save_corpus(documents, chunks, records)
    click.echo(
        f"augmented {len(documents)} documents into {len(chunks)} chunks "
        f"({store.chunks_path})"
    )


@main.command(name="enrich")
@click.option("--seed-faq", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSONL of {question, answer} seed pairs.")
@click.option("--n-variants", default=19, show_default=True,
              help="Paraphrase variants per canonical entry.")
@click.option("--mock-providers", is_flag=True)
@click.option("--dimension", default=64, show_default=True)
@click.pass_obj
def enrich_cmd(obj: dict, seed_faq: str | None, n_variants: int,
               mock_providers: bool, dimension: int) -> None:
    """Expand the seed FAQ, mine Q-A pairs from chunks, paraphrase everything."""
    store: Store = obj["store"]
    _, chunks, _ = store.load_corpus()
    if seed_faq:
        seeds = []
        with open(seed_faq, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                record = json.loads(line)
                if "question" not in record:
                    continue  # tolerate a header record
                seeds.append(seed_entry(record["question"], record["answer"]))
        store.save_seed_faq(seeds)
    else:
        seeds = store.load_seed_faq()
    embedder, generator = _resolve_providers(mock_providers, dimension)
    entries = enrich(
        chunks, seeds, generator, embedder, EnrichParams(n_variants=n_variants)
    )
    dangling = check_references(chunks, entries)
    if dangling:
        raise click.ClickException("enrichment produced dangling refs: " + dangling[0])
    store.save_faq(entries)
    click.echo(
        f"enriched FAQ: {len(seeds)} seeds -> {len(entries)} entries "
        f"({store.faq_path})"
    )


@main.command()
@click.option("--mock-providers", is_flag=True)
@click.option("--dimension", default=64, show_default=True)
@click.option("--max-queries", default=TUNE_QUERY_CAP, show_default=True)
@click.pass_obj
def tune(obj: dict, mock_providers: bool, dimension: int, max_queries: int) -> None:
    """Sweep both thresholds on held-out paraphrases and write the config."""
    store: Store = obj["store"]
    _, chunks, _ = store.load_corpus()
    entries = store.load_faq()
    embedder, _ = _resolve_providers(mock_providers, dimension)

    # Hold one paraphrase per canonical out of the index and use it as a query.
    by_canonical: dict[str, list] = {}
    for entry in entries:
        if entry.is_paraphrase:
            by_canonical.setdefault(entry.canonical_id, []).append(entry)
    held_out = {
        min(group, key=lambda e: e.id).id for group in by_canonical.values()
    }
    indexed = [e for e in entries if e.id not in held_out]
    queries = [
        LabeledQuery(
            query_id=e.id,
            vector=e.question_embedding,
            relevant_ids=frozenset({e.canonical_id}),
        )
        for e in entries
        if e.id in held_out
    ][:max_queries]
    if not queries:
        raise click.ClickException(
            "no paraphrase entries to hold out; run enrich with --n-variants >= 1"
        )

    from .index import IndexEntry, build

    faq_index = build(
        [IndexEntry(e.id, e.question_embedding) for e in indexed]
    )
    faq_sweep = sweep_faq_threshold(
        queries, faq_index, {e.id: e.canonical_id for e in indexed}
    )

    doc_index = build([IndexEntry(c.id, c.embedding) for c in chunks])
    doc_queries = [
        LabeledQuery(
            query_id=c.id,
            vector=embedder.embed(c.summary),
            relevant_ids=frozenset({c.id}),
        )
        for c in chunks
    ][:max_queries]
    doc_sweep = sweep_doc_threshold(doc_queries, doc_index)

    base = _load_config(store, obj["config_path"])
    config = RouterConfig(
        t_faq=faq_sweep.best_threshold,
        t_doc=doc_sweep.best_threshold,
        k_faq=base.k_faq,
        k_doc=base.k_doc,
        disclaimer_tier2=base.disclaimer_tier2,
        disclaimer_fallback=base.disclaimer_fallback,
        prompt_template=base.prompt_template,
        max_prompt_chars=base.max_prompt_chars,
    )
    store.save_config(config)
    for name, sweep in (("faq", faq_sweep), ("doc", doc_sweep)):
        write_jsonl(
            store.root / "eval" / f"sweep_{name}.jsonl",
            "tierqa/sweep",
            ({"threshold": t, "mrr": m} for t, m in sweep.curve),
            meta={"best_threshold": sweep.best_threshold},
        )
    click.echo(f"t_faq={config.t_faq:.2f} t_doc={config.t_doc:.2f}")
    click.echo(f"config written to {store.config_path}")


@main.command(name="eval")
@click.argument("judgments_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--envelopes", "envelopes_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Envelope log to break down by tier.")
@click.pass_obj
def eval_cmd(obj: dict, judgments_path: str, envelopes_path: str | None) -> None:
    """Compute accuracy (and per-tier stats) from a judgments file."""
    store: Store = obj["store"]
    judgments = store.load_judgments(Path(judgments_path))
    score = accuracy(judgments)
    click.echo(f"accuracy: {score:.3f} ({sum(j.correct for j in judgments)}"
               f"/{len(judgments)})")
    report = {"accuracy": score, "n": len(judgments)}
    if envelopes_path:
        envelopes = store.load_envelopes(Path(envelopes_path))
        breakdown = tier_report(envelopes, judgments)
        click.echo(format_tier_table(breakdown))
        report["tiers"] = breakdown.to_dict()
    out_path = store.root / "eval" / "report.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    click.echo(f"report written to {out_path}")


@main.command()
@click.argument("question")
@click.option("--mock-providers", is_flag=True)
@click.pass_obj
def ask(obj: dict, question: str, mock_providers: bool) -> None:
    """Answer one question against the current store."""
    store: Store = obj["store"]
    try:
        state = state_from_store(
            store, mock_providers,
            config=_load_config(store, obj["config_path"]),
        )
        envelope = routing.answer(
            question, state.snapshot, state.config, state.generator, state.embedder
        )
    except (ProviderError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"[tier: {envelope.tier.value}]")
    click.echo(envelope.answer_text)
    for key, score in envelope.matches:
        click.echo(f"  source {key} (score {score:.3f})")


@main.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--mock-providers", is_flag=True)
@click.pass_obj
def serve(obj: dict, port: int, host: str, mock_providers: bool) -> None:
    """Serve the chat API over HTTP."""
    store: Store = obj["store"]
    try:
        state = state_from_store(
            store, mock_providers,
            config=_load_config(store, obj["config_path"]),
        )
    except (ProviderError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(state)
    click.echo(
        f"serving {len(state.snapshot.faq_entries)} FAQ entries and "
        f"{len(state.snapshot.chunks)} chunks on {host}:{port}"
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
