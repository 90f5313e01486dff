"""Command line interface: index builds, runs, comparisons, lake generation."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import click

from .errors import TableLiftError
from .lakeindex import build_index, load_index, save_index
from .mlkit.selection import METHODS as SELECT_METHODS
from .mlkit.vectorize import SCHEMES
from .pipeline import (
    MODEL_CHOICES,
    MODES,
    STRATEGIES,
    LakeSpec,
    RunConfig,
    compare_modes,
    generate_lake,
    persist_run,
    run,
)
from .tablecore import load_corpus, load_query_table, save_target_table


def _mode_value(text: str) -> str:
    return text.replace("-", "_")


_CONFIG_FLAGS = [
    click.option("--k", default=60, show_default=True, type=int,
                 help="Search hits kept per query row and measure."),
    click.option("--m", default=600, show_default=True, type=int,
                 help="Tables kept by the selection stage."),
    click.option("--strategy", default="threshold", show_default=True,
                 type=click.Choice(STRATEGIES),
                 help="Column aggregation strategy."),
    click.option("--tau", default=0.6, show_default=True, type=float,
                 help="Name-similarity threshold for aggregation."),
    click.option("--cluster-count", default=None, type=int,
                 help="Cluster count for soft aggregation."),
    click.option("--select-method", default=None,
                 type=click.Choice(SELECT_METHODS),
                 help="Feature selection method used inside evaluation."),
    click.option("--select-count", default=None, type=int,
                 help="Features kept by feature selection."),
    click.option("--model", default="random_forest", show_default=True,
                 type=click.Choice(MODEL_CHOICES)),
    click.option("--folds", default=4, show_default=True, type=int),
    click.option("--metric", default=None, type=click.Choice(["rmse"]),
                 help="Force RMSE reporting for regression."),
    click.option("--scheme", default="auto", show_default=True,
                 type=click.Choice(SCHEMES), help="Text vectorization scheme."),
    click.option("--seed", default=0, show_default=True, type=int),
    click.option("--lam", default=0.01, show_default=True, type=float,
                 help="L1 strength for linear models."),
    click.option("--n-trees", default=100, show_default=True, type=int),
    click.option("--entity-name", default=None,
                 help="What one query row denotes, e.g. a product line."),
    click.option("--task-description", default=None,
                 help="Free-form text describing the prediction task."),
]

_INPUT_FLAGS = [
    click.option("--query", "query_path", required=True,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Query table CSV with a header row."),
    click.option("--key", required=True, help="Join-key column name."),
    click.option("--task", required=True, help="Prediction target column name."),
    click.option("--task-kind", default="regression", show_default=True,
                 type=click.Choice(["regression", "classification"])),
    click.option("--index", "index_path", default=None,
                 type=click.Path(exists=True, dir_okay=False),
                 help="Prebuilt index file."),
    click.option("--corpus", "corpus_dir", default=None,
                 type=click.Path(exists=True, file_okay=False),
                 help="Corpus directory to index on the fly."),
]


def _apply(flags):
    def wrap(f):
        for flag in reversed(flags):
            f = flag(f)
        return f
    return wrap


def _build_config(mode: str, kw: dict) -> RunConfig:
    return RunConfig(mode=_mode_value(mode), **kw)


def _load_inputs(query_path, key, task, task_kind, index_path, corpus_dir,
                 seed):
    if (index_path is None) == (corpus_dir is None):
        raise click.UsageError("provide exactly one of --index or --corpus")
    query = load_query_table(Path(query_path).read_bytes(), key, task,
                             task_kind)
    if index_path is not None:
        index = load_index(index_path)
    else:
        index = build_index(load_corpus(corpus_dir), seed=seed)
    return query, index


def _runs_root(out_dir: str | None) -> Path | None:
    if out_dir is not None:
        return Path(out_dir)
    env = os.environ.get("TABLELIFT_DATA_DIR")
    return Path(env) / "runs" if env else None


@click.group()
def main():
    """Data-lake table enrichment toolkit."""


@main.group()
def index():
    """Build and inspect join indexes."""


@index.command("build")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--output", required=True,
              type=click.Path(dir_okay=False), help="Index file to write.")
@click.option("--seed", default=0, show_default=True, type=int)
def index_build(corpus_dir, output, seed):
    """Index every join-key cell under CORPUS_DIR (*.table.json files)."""
    try:
        corpus = load_corpus(corpus_dir)
        idx = build_index(corpus, seed=seed)
        save_index(idx, output)
    except TableLiftError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"Indexed {idx.doc_count} join-key cells from "
               f"{len(corpus)} tables -> {output}")
    if corpus.skipped_count:
        click.echo(f"Skipped {corpus.skipped_count} invalid table files")


@main.command("run")
@_apply(_INPUT_FLAGS)
@click.option("--mode", default="join-select-align", show_default=True,
              help="One of " + ", ".join(m.replace("_", "-") for m in MODES))
@_apply(_CONFIG_FLAGS)
@click.option("--out", "out_dir", default=None,
              type=click.Path(file_okay=False),
              help="Directory for run artifacts; defaults to "
                   "$TABLELIFT_DATA_DIR/runs when set.")
def run_cmd(query_path, key, task, task_kind, index_path, corpus_dir, mode,
            out_dir, **config_kw):
    """Run one enrichment configuration and report before/after scores."""
    try:
        config = _build_config(mode, config_kw)
        query, idx = _load_inputs(query_path, key, task, task_kind,
                                  index_path, corpus_dir, config.seed)
        result = run(config, query, idx.corpus, idx)
    except TableLiftError as exc:
        raise click.ClickException(str(exc))

    before, after = result.before, result.after
    counts = result.candidate_counts
    click.echo(f"Mode {mode} with model {result.model_kind_used}: "
               f"{counts['after_search']} tables matched, "
               f"{counts['after_selection']} kept, "
               f"{len(result.enriched.enriched_columns)} columns added")
    click.echo(f"Before: {before.metric} {before.mean:.4f} ± {before.std:.4f}")
    click.echo(f"After:  {after.metric} {after.mean:.4f} ± {after.std:.4f}")
    click.echo(f"Improvement: {result.improvement_pct:+.2f}%")
    stages = "  ".join(f"{name} {seconds:.3f}s"
                       for name, seconds in result.stage_seconds.items()
                       if seconds is not None)
    click.echo(f"Stages: {stages}")

    runs_root = _runs_root(out_dir)
    if runs_root is not None:
        saved = persist_run(result, runs_root)
        click.echo(f"Saved run to {saved}")


@main.command("compare")
@_apply(_INPUT_FLAGS)
@click.option("--modes", default="all", show_default=True,
              help='"all" or a comma-separated mode list.')
@_apply(_CONFIG_FLAGS)
@click.option("--csv", "csv_path", default=None,
              type=click.Path(dir_okay=False),
              help="Also write the comparison as CSV.")
def compare_cmd(query_path, key, task, task_kind, index_path, corpus_dir,
                modes, csv_path, **config_kw):
    """Run several modes against the same inputs and tabulate the scores."""
    if modes == "all":
        mode_list = list(MODES)
    else:
        mode_list = [_mode_value(m.strip()) for m in modes.split(",") if m.strip()]
    try:
        configs = [_build_config(m, config_kw) for m in mode_list]
        seed = configs[0].seed if configs else 0
        query, idx = _load_inputs(query_path, key, task, task_kind,
                                  index_path, corpus_dir, seed)
        comparison = compare_modes(configs, query, idx.corpus, idx)
    except TableLiftError as exc:
        raise click.ClickException(str(exc))
    click.echo(comparison.to_text(), nl=False)
    if csv_path is not None:
        Path(csv_path).write_text(comparison.to_csv(), encoding="utf-8")
        click.echo(f"Wrote {csv_path}")


@main.command("gen-lake")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON file with lake parameters.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def gen_lake(spec_path, out_dir):
    """Generate a synthetic lake: corpus/, query.csv, and truth.json."""
    try:
        data = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"spec file is not valid JSON: {exc}")
    try:
        spec = LakeSpec(**data)
    except TypeError as exc:
        raise click.ClickException(f"bad spec field: {exc}")
    try:
        lake = generate_lake(spec)
    except TableLiftError as exc:
        raise click.ClickException(str(exc))

    out = Path(out_dir)
    corpus_dir = out / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for table in lake.corpus:
        save_target_table(table, corpus_dir / f"{table.id}.table.json")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(lake.query.column_names)
    writer.writerows(lake.query.rows)
    (out / "query.csv").write_text(buf.getvalue(), encoding="utf-8")
    (out / "truth.json").write_text(
        json.dumps({tid: list(rows) for tid, rows in lake.truth.items()},
                   indent=1), encoding="utf-8")
    click.echo(f"Wrote {len(lake.corpus)} tables, query.csv "
               f"({len(lake.query.rows)} rows), truth.json -> {out}")


@main.command("serve")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data-dir", default=None,
              help="Uploads and runs root; defaults to $TABLELIFT_DATA_DIR.")
@click.option("--ui-dir", default=None,
              help="Static UI build to serve at /ui.")
@click.option("--workers", default=2, show_default=True, type=int,
              help="Concurrent enrichment jobs.")
@click.option("--queue-limit", default=16, show_default=True, type=int)
def serve(index_path, host, port, data_dir, ui_dir, workers, queue_limit):
    """Serve the HTTP API (and the UI, when built) over a prebuilt index."""
    import uvicorn

    from .service import create_app

    try:
        idx = load_index(index_path)
    except TableLiftError as exc:
        raise click.ClickException(str(exc))
    app = create_app(idx, data_dir=data_dir, max_workers=workers,
                     queue_limit=queue_limit, ui_dir=ui_dir)
    click.echo(f"Serving {len(idx.corpus)} tables on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
