"""Command-line entry points.

Each subcommand wraps one library operation. Usage mistakes exit 2 (via
click); operational failures print one diagnostic line to stderr and
exit 1. Artifacts live under the configured data directory unless a
command takes an explicit output path.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import (
    ServiceConfig,
    build_backend,
    build_provider,
    load_config,
    resources_for_pipeline,
)
from .errors import PvragError
from .evaluation import (
    build_balanced_dataset,
    build_report,
    emit_report,
    read_dataset_jsonl,
    run_eval,
    write_dataset_jsonl,
)
from .graph import build_graph, write_cypher_script, write_graph_jsonl
from .index import build_index, save_index
from .kb import corpus_text, export_corpus, load_kb, load_sider, load_tsv, save_kb
from .pipeline import PIPELINES, run_query
from .service import create_app


def _fail(message) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _config(ctx: click.Context, **overrides) -> ServiceConfig:
    try:
        return load_config(ctx.obj.get("config_path"), overrides=overrides)
    except PvragError as exc:
        _fail(exc)


def _load_kb(config: ServiceConfig):
    path = config.resolved_kb_path()
    if not path.exists():
        _fail(f"knowledge base not found at {path} (run `pvrag ingest` first)")
    try:
        return load_kb(path)
    except PvragError as exc:
        _fail(exc)


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Path to a key=value config file (default: $PVRAG_CONFIG).",
)
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Drug side-effect retrieval engine."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--sider-se", type=click.Path(exists=True, dir_okay=False), help="meddra_all_se.tsv")
@click.option("--sider-atc", type=click.Path(exists=True, dir_okay=False), help="drug_atc.tsv")
@click.option("--sider-names", type=click.Path(exists=True, dir_okay=False), help="drug_names.tsv")
@click.option("--data-dir", default=None)
@click.pass_context
def ingest(ctx, input_path, sider_se, sider_atc, sider_names, data_dir):
    """Parse an association table and save the knowledge base."""
    sider = (sider_se, sider_atc, sider_names)
    if input_path and any(sider):
        raise click.UsageError("--input and --sider-* are mutually exclusive")
    if not input_path and not all(sider):
        raise click.UsageError(
            "provide --input TSV, or all of --sider-se/--sider-atc/--sider-names"
        )
    config = _config(ctx, data_dir=data_dir)
    try:
        kb = load_tsv(input_path) if input_path else load_sider(sider_se, sider_atc, sider_names)
        path = config.resolved_kb_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        save_kb(kb, path)
    except PvragError as exc:
        _fail(exc)
    click.echo(
        f"ingested {len(kb.associations)} associations, "
        f"{len(kb.drugs)} drugs, {len(kb.terms)} side-effect terms"
    )
    click.echo(f"knowledge base written to {path}")


@main.command()
@click.option("--format", "fmt", type=click.Choice(["A", "B"], case_sensitive=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def corpus(ctx, fmt, out):
    """Render the knowledge base as retrieval text, one chunk per line."""
    config = _config(ctx)
    kb = _load_kb(config)
    fmt = fmt.upper()
    chunks = export_corpus(kb, fmt)
    path = Path(out) if out else Path(config.data_dir) / f"corpus_{fmt.lower()}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(corpus_text(chunks), encoding="utf-8")
    click.echo(f"{len(chunks)} format-{fmt} chunks written to {path}")


@main.command()
@click.option("--format", "fmt", type=click.Choice(["A", "B"], case_sensitive=False), required=True)
@click.pass_context
def index(ctx, fmt):
    """Embed a corpus and save the vector index."""
    config = _config(ctx)
    kb = _load_kb(config)
    fmt = fmt.upper()
    try:
        provider = build_provider(config)
        built = build_index(export_corpus(kb, fmt), provider)
        path = config.resolved_index_path(fmt)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_index(built, path)
    except PvragError as exc:
        _fail(exc)
    click.echo(f"indexed {len(built)} chunks ({built.provider_fingerprint}) to {path}")


@main.command()
@click.pass_context
def graph(ctx):
    """Project the knowledge base into the property graph and export it."""
    config = _config(ctx)
    kb = _load_kb(config)
    built = build_graph(kb)
    jsonl_path = config.resolved_graph_path()
    jsonl_path.parent.mkdir(parents=True, exist_ok=True)
    write_graph_jsonl(built, jsonl_path)
    script_path = jsonl_path.with_suffix(".cypher")
    write_cypher_script(built, script_path)
    click.echo(f"graph: {len(built.nodes)} nodes, {built.edge_count()} edges")
    click.echo(f"written to {jsonl_path} and {script_path}")


@main.command("sample-dataset")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def sample_dataset(ctx, seed, out):
    """Build the balanced benchmark and write it as JSON Lines."""
    config = _config(ctx)
    kb = _load_kb(config)
    try:
        dataset = build_balanced_dataset(kb, seed)
    except PvragError as exc:
        _fail(exc)
    path = Path(out) if out else Path(config.data_dir) / f"dataset_seed{seed}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_jsonl(dataset, path)
    click.echo(
        f"{len(dataset.drug_ids())} drugs, {len(dataset.pairs)} pairs "
        f"(seed {seed}) written to {path}"
    )


@main.command()
@click.option("--pipeline", type=click.Choice(PIPELINES), default=None)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--parallelism", type=int, default=None)
@click.option("--backend", "backend_kind", type=click.Choice(["deterministic", "http"]), default=None)
@click.pass_context
def evaluate(ctx, pipeline, seed, dataset_path, out_dir, parallelism, backend_kind):
    """Run the benchmark through one pipeline; print the markdown report,
    write the JSON report beside the data."""
    config = _config(ctx, backend=backend_kind, parallelism=parallelism)
    pipeline = pipeline or config.default_pipeline
    try:
        resources = resources_for_pipeline(config, pipeline)
        dataset = (
            read_dataset_jsonl(dataset_path)
            if dataset_path
            else build_balanced_dataset(resources.kb, seed)
        )
        backend = build_backend(config)
        run = run_eval(dataset, pipeline, resources, backend, parallelism=config.parallelism)
    except PvragError as exc:
        _fail(exc)
    report = build_report(
        run, resources.kb, seed=dataset.seed, kb_fingerprint=dataset.kb_fingerprint
    )
    out = Path(out_dir) if out_dir else Path(config.data_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"report_{pipeline}.json"
    json_path.write_text(emit_report(report, "json"), encoding="utf-8")
    click.echo(emit_report(report, "markdown"), nl=False)
    click.echo(f"json report written to {json_path}", err=True)


@main.command()
@click.argument("question")
@click.option("--pipeline", type=click.Choice(PIPELINES), default=None)
@click.option("--k", type=int, default=None)
@click.option("--verbose", is_flag=True)
@click.pass_context
def query(ctx, question, pipeline, k, verbose):
    """Answer one question; the first output line is the YES/NO decision."""
    config = _config(ctx, k=k)
    pipeline = pipeline or config.default_pipeline
    try:
        resources = resources_for_pipeline(config, pipeline)
        backend = build_backend(config)
        answer = run_query(question, pipeline, resources, backend)
    except PvragError as exc:
        _fail(f"{exc.code}: {exc}")
    click.echo(answer.decision)
    if answer.explanation:
        click.echo(answer.explanation)
    if verbose:
        if answer.prompt.assertion:
            click.echo(f"assertion: {answer.prompt.assertion}")
        for text in answer.evidence_texts:
            click.echo(f"evidence: {text}")


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx, host, port):
    """Start the HTTP service over the prepared artifacts."""
    import uvicorn

    config = _config(ctx, host=host, port=port)
    try:
        app = create_app(config)
    except PvragError as exc:
        _fail(exc)
    click.echo(f"serving on http://{config.host}:{config.port}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


if __name__ == "__main__":
    main()
