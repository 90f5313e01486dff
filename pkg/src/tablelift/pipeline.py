"""End-to-end orchestration: run ablation modes, grow synthetic lakes, report.

A run wires the stages together under one config: key search over the index,
metadata-based table selection, column aggregation, then a cross-validated
before/after evaluation on the query table alone versus the enriched table.
Everything downstream (CLI, service, comparisons) goes through `run`.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
import uuid
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import enrich
from .enrich import EnrichedTable
from .errors import InvalidCount, InvalidSpec
from .lakeindex import JoinIndex
from .mlkit import (
    EvalConfig,
    EvalReport,
    ImportanceReport,
    TableVectorizer,
    cross_validate_detailed,
    feature_importance,
    train,
)
from .mlkit.vectorize import SCHEMES
from .tablecore import Corpus, QueryTable, TargetTable

MODES = ("no_enrich", "join", "join_align", "join_select", "join_select_align")
MODEL_CHOICES = ("lasso_linear", "random_forest", "best_of_both")
STRATEGIES = ("hard", "threshold", "soft")

# mode -> (search runs, selection runs, aggregation runs)
_MODE_STAGES = {
    "no_enrich": (False, False, False),
    "join": (True, False, False),
    "join_align": (True, False, True),
    "join_select": (True, True, False),
    "join_select_align": (True, True, True),
}

_LOWER_IS_BETTER = ("MSE", "RMSE")


@dataclass(frozen=True)
class RunConfig:
    """Every knob of one enrichment run; defaults match the reference setup."""

    mode: str = "join_select_align"
    k: int = 60
    m: int = 600
    strategy: str = "threshold"
    tau: float = 0.6
    cluster_count: int | None = None
    select_method: str | None = None
    select_count: int | None = None
    model: str = "random_forest"
    folds: int = 4
    metric: str | None = None
    scheme: str = "auto"
    seed: int = 0
    lam: float = 0.01
    n_trees: int = 100
    entity_name: str | None = None
    task_description: str | None = None


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    stage_seconds: dict[str, float | None]
    before: EvalReport
    after: EvalReport
    improvement_pct: float
    importance: ImportanceReport
    enriched: EnrichedTable
    candidate_counts: dict[str, int]
    tables_used: tuple[str, ...]
    table_scores: tuple[enrich.TableScore, ...]
    model_kind_used: str
    before_predictions: tuple
    after_predictions: tuple
    truth: tuple

    @property
    def enrichment_seconds(self) -> float | None:
        ran = [self.stage_seconds[s] for s in ("search", "select", "align")
               if self.stage_seconds[s] is not None]
        return sum(ran) if ran else None

    def to_json(self) -> dict:
        return {
            "config": dataclasses.asdict(self.config),
            "stage_seconds": dict(self.stage_seconds),
            "before": self.before.to_json(),
            "after": self.after.to_json(),
            "improvement_pct": self.improvement_pct,
            "importance": self.importance.to_json(),
            "candidate_counts": dict(self.candidate_counts),
            "tables_used": list(self.tables_used),
            "table_scores": [{"table_id": ts.table_id, "score": ts.score}
                             for ts in self.table_scores],
            "model_kind_used": self.model_kind_used,
            "provenance": self.enriched.provenance_payload(),
            "predictions": {
                "before": list(self.before_predictions),
                "after": list(self.after_predictions),
                "truth": list(self.truth),
            },
            "enriched_csv": "enriched.csv",
        }


def improvement_pct(metric: str, before: float, after: float) -> float:
    """Signed percent change where positive always means the model got better.

    Error metrics count reductions, score metrics count gains.  A zero
    baseline has no meaningful relative change, so it reports 0.
    """
    if before == 0:
        return 0.0
    if metric in _LOWER_IS_BETTER:
        return (before - after) / before * 100.0
    return (after - before) / before * 100.0


def _validate_config(config: RunConfig) -> None:
    if config.mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {config.mode!r}")
    if config.model not in MODEL_CHOICES:
        raise ValueError(
            f"model must be one of {MODEL_CHOICES}, got {config.model!r}")
    if config.strategy not in STRATEGIES:
        raise ValueError(
            f"strategy must be one of {STRATEGIES}, got {config.strategy!r}")
    if config.scheme not in SCHEMES:
        raise ValueError(
            f"scheme must be one of {SCHEMES}, got {config.scheme!r}")
    if config.k < 1:
        raise InvalidCount(f"k must be positive, got {config.k}")
    if config.m < 1:
        raise InvalidCount(f"m must be positive, got {config.m}")
    if config.folds < 2:
        raise ValueError(f"folds must be at least 2, got {config.folds}")


@contextmanager
def _stage_errors(stage: str):
    """Tag any escaping exception with the stage it came from."""
    try:
        yield
    except Exception as exc:
        if exc.args and isinstance(exc.args[0], str):
            exc.args = (f"[{stage}] {exc.args[0]}",) + exc.args[1:]
        else:
            exc.args = (f"stage: {stage}",) + exc.args
        exc.stage = stage
        raise


def _eval_once(table: EnrichedTable, config: RunConfig, kind: str):
    ec = EvalConfig(model=kind, folds=config.folds, metric=config.metric,
                    scheme=config.scheme, seed=config.seed, lam=config.lam,
                    n_trees=config.n_trees,
                    select_method=config.select_method,
                    select_count=config.select_count)
    report, predictions, truth = cross_validate_detailed(table, ec)
    if table.base.task_kind == "regression":
        preds = tuple(float(p) for p in predictions)
        truths = tuple(float(t) for t in truth)
    else:
        preds = tuple(str(p) for p in predictions)
        truths = tuple(str(t) for t in truth)
    return report, preds, truths


def run(config: RunConfig, query: QueryTable, corpus: Corpus,
        index: JoinIndex,
        on_stage: Callable[[str], None] | None = None) -> RunResult:
    """Execute one enrichment run and evaluate it against the plain query.

    `on_stage` fires with "searching", "selecting", "aligning", "evaluating"
    as each stage begins; skipped stages never fire and keep a None timing.
    The search figure includes row mapping and draft assembly, which finish
    the join; aggregation alone is billed to the align stage.  The baseline
    evaluation reuses the run's model, folds, and seed, so before and after
    differ only in the enriched columns.
    """
    _validate_config(config)
    notify = on_stage or (lambda stage: None)
    do_search, do_select, do_align = _MODE_STAGES[config.mode]
    timings: dict[str, float | None] = dict.fromkeys(
        ("search", "select", "align", "eval"))

    matches: list[enrich.CandidateMatch] = []
    if do_search:
        notify("searching")
        t0 = time.perf_counter()
        with _stage_errors("search"):
            matches = enrich.join_row_search(index, query, config.k)
        timings["search"] = time.perf_counter() - t0
    after_search_ids = sorted({m.hit.doc.table_id for m in matches})

    selected_ids: set[str] | None = None
    scored: list[enrich.TableScore] = []
    if do_select:
        notify("selecting")
        t0 = time.perf_counter()
        with _stage_errors("select"):
            texts = enrich.generate_query_texts(
                query, config.entity_name, config.task_description)
            scored = enrich.select_tables(after_search_ids, texts, corpus,
                                          index.provider, config.m)
            selected_ids = {ts.table_id for ts in scored}
        timings["select"] = time.perf_counter() - t0

    if do_search:
        t0 = time.perf_counter()
        with _stage_errors("search"):
            mapped = enrich.map_rows(matches, selected_ids)
            enriched = enrich.assemble_draft(query, mapped, corpus)
        timings["search"] += time.perf_counter() - t0
        tables_used = tuple(sorted({tid for (_, tid) in mapped}))
    else:
        enriched = EnrichedTable(base=query)
        tables_used = ()

    if do_align:
        notify("aligning")
        t0 = time.perf_counter()
        with _stage_errors("align"):
            enriched = enrich.aggregate_columns(
                enriched, config.strategy, tau=config.tau,
                cluster_count=config.cluster_count,
                provider=index.provider, seed=config.seed)
        timings["align"] = time.perf_counter() - t0

    notify("evaluating")
    t0 = time.perf_counter()
    with _stage_errors("eval"):
        kinds = (("lasso_linear", "random_forest")
                 if config.model == "best_of_both" else (config.model,))
        baseline = EnrichedTable(base=query)
        best = None
        for kind in kinds:
            before_rep, before_pred, truths = _eval_once(baseline, config, kind)
            if config.mode == "no_enrich":
                after_rep, after_pred = before_rep, before_pred
            else:
                after_rep, after_pred, _ = _eval_once(enriched, config, kind)
            candidate = (kind, before_rep, before_pred, after_rep, after_pred,
                         truths)
            if best is None:
                best = candidate
            else:
                lower = after_rep.metric in _LOWER_IS_BETTER
                incumbent = best[3].mean
                if (after_rep.mean < incumbent) if lower else (after_rep.mean > incumbent):
                    best = candidate
        kind, before_rep, before_pred, after_rep, after_pred, truths = best

        importance_table = enriched if config.mode != "no_enrich" else baseline
        X = TableVectorizer(config.scheme).fit(importance_table).transform(
            importance_table, range(len(query.rows)))
        model = train(X, kind, lam=config.lam, n_trees=config.n_trees,
                      seed=config.seed)
        importance = feature_importance(model, X)
    timings["eval"] = time.perf_counter() - t0

    if do_select:
        table_scores = tuple(scored)
    elif tables_used:
        # reporting only, so this metadata scoring is not billed to a stage
        texts = enrich.generate_query_texts(query, config.entity_name,
                                            config.task_description)
        table_scores = tuple(sorted(
            (enrich.score_table(texts, corpus.get(tid), index.provider)
             for tid in tables_used),
            key=lambda ts: (-ts.score, ts.table_id)))
    else:
        table_scores = ()

    after_selection = len(scored) if do_select else len(tables_used)
    return RunResult(
        config=config,
        stage_seconds=timings,
        before=before_rep,
        after=after_rep,
        improvement_pct=improvement_pct(after_rep.metric, before_rep.mean,
                                        after_rep.mean),
        importance=importance,
        enriched=enriched,
        candidate_counts={"after_search": len(after_search_ids),
                          "after_selection": after_selection},
        tables_used=tables_used,
        table_scores=table_scores,
        model_kind_used=kind,
        before_predictions=before_pred,
        after_predictions=after_pred,
        truth=truths,
    )


# ---------------------------------------------------------------- lakes

@dataclass(frozen=True)
class LakeSpec:
    """Recipe for a synthetic lake with known joins and a known signal."""

    table_count: int = 200
    rows_per_table: int = 30
    overlap_rate: float = 0.8
    signal_count: int = 1
    rho: float = 0.9
    adversarial_count: int = 0
    query_rows: int = 100
    task_kind: str = "regression"
    seed: int = 0


class GeneratedLake(NamedTuple):
    query: QueryTable
    corpus: Corpus
    truth: dict[str, tuple[int, ...]]  # table id -> signal row per query row


_KEY_BASE = ("acme", "zenith", "vertex", "crown", "ember", "falcon",
             "garnet", "harbor", "indigo", "juniper", "krypton", "lumen")
_NOISE_KEY_BASE = ("moss", "pebble", "quartz", "reef", "slate", "tundra",
                   "umber", "vale", "wharf", "yarrow")
_THEME_WORDS = ("retail", "units", "growth", "demand", "margin", "volume",
                "segment", "quarter", "channel", "outlet")
_ADV_WORDS = ("orchid", "garden", "bloom", "petal", "botany", "greenhouse",
              "pollen", "stem", "flora", "nectar")
_NOISE_WORDS = ("asteroid", "comet", "nebula", "quasar", "galaxy", "cosmic",
                "lunar", "stellar", "meteor", "eclipse")

_QUERY_COLUMNS = ("product name", "year", "market value")


def _validate_spec(spec: LakeSpec) -> None:
    if spec.table_count < 1:
        raise InvalidSpec(f"table_count must be positive, got {spec.table_count}")
    if spec.rows_per_table < 1:
        raise InvalidSpec(
            f"rows_per_table must be positive, got {spec.rows_per_table}")
    if spec.query_rows < 2:
        raise InvalidSpec(f"query_rows must be at least 2, got {spec.query_rows}")
    if spec.signal_count < 0 or spec.adversarial_count < 0:
        raise InvalidSpec("table counts cannot be negative")
    if spec.signal_count + spec.adversarial_count > spec.table_count:
        raise InvalidSpec(
            f"signal ({spec.signal_count}) + adversarial "
            f"({spec.adversarial_count}) exceed table_count ({spec.table_count})")
    if not -1.0 <= spec.rho <= 1.0:
        raise InvalidSpec(f"rho must lie in [-1, 1], got {spec.rho}")
    if not 0.0 <= spec.overlap_rate <= 1.0:
        raise InvalidSpec(
            f"overlap_rate must lie in [0, 1], got {spec.overlap_rate}")
    if spec.task_kind not in ("regression", "classification"):
        raise InvalidSpec(f"unknown task_kind {spec.task_kind!r}")


def _numbered_tokens(base: tuple[str, ...], count: int) -> list[str]:
    return [f"{base[i % len(base)]}{i // len(base)}" for i in range(count)]


def _standardized(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean()
    return centered / centered.std()


def _correlated_with(y_std: np.ndarray, rho: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Standardized vector whose sample correlation with y_std is exactly rho.

    The noise draw is centered and projected off y_std, so the two parts are
    orthogonal and the mixing weights translate directly into correlation.
    """
    noise = rng.standard_normal(len(y_std))
    centered = noise - noise.mean()
    residual = centered - (centered @ y_std) / (y_std @ y_std) * y_std
    if rho in (1.0, -1.0):
        return rho * y_std
    return rho * y_std + math.sqrt(1.0 - rho * rho) * _standardized(residual)


def _key_variant(key: str, overlap_rate: float,
                 rng: np.random.Generator) -> str:
    tokens = key.split()
    kept = [t for t in tokens if rng.random() < overlap_rate]
    if not kept:
        kept = [tokens[int(rng.integers(len(tokens)))]]
    order = rng.permutation(len(kept))
    return " ".join(kept[int(i)] for i in order)


def generate_lake(spec: LakeSpec) -> GeneratedLake:
    """Build a query table plus a corpus with planted, recoverable structure.

    Signal tables cover every query row under noisy key variants and carry a
    numeric column correlated with the target at exactly rho.  Adversarial
    tables join on the same keys but are topically foreign with uncorrelated
    values.  Noise tables share no key vocabulary at all.  The truth mapping
    records which signal row belongs to each query row, enabling exact-join
    oracles.  Identical specs produce identical lakes.
    """
    _validate_spec(spec)
    rng = np.random.default_rng(spec.seed)
    n = spec.query_rows

    y_std = _standardized(rng.standard_normal(n))
    key_tokens = _numbered_tokens(_KEY_BASE, 3 * n)
    perm = rng.permutation(3 * n)
    keys = [" ".join(key_tokens[int(perm[3 * i + j])] for j in range(3))
            for i in range(n)]

    query_rows = []
    for i in range(n):
        year = str(1980 + int(rng.integers(0, 40)))
        if spec.task_kind == "regression":
            target = repr(float(100.0 + 20.0 * y_std[i]))
        else:
            target = "high" if y_std[i] > 0 else "low"
        query_rows.append((keys[i], year, target))
    query = QueryTable(column_names=_QUERY_COLUMNS,
                       rows=tuple(query_rows),
                       key_column=0, task_column=2,
                       task_kind=spec.task_kind)

    tables: list[TargetTable] = []
    truth: dict[str, tuple[int, ...]] = {}

    for s in range(spec.signal_count):
        x_std = _correlated_with(y_std, spec.rho, rng)
        x_vals = 50.0 + 10.0 * x_std
        row_order = rng.permutation(n)
        rows = []
        for j in range(n):
            qi = int(row_order[j])
            rows.append((
                _key_variant(keys[qi], spec.overlap_rate, rng),
                repr(float(x_vals[qi])),
                str(rng.choice(_THEME_WORDS)),
            ))
        tid = f"sig{s:03d}"
        tables.append(TargetTable(
            id=tid,
            title=f"product market value indicators {s}",
            context="yearly market figures by product",
            column_names=("product name", f"indicator {s}", "region"),
            rows=tuple(rows)))
        inverse = np.argsort(row_order)
        truth[tid] = tuple(int(j) for j in inverse)

    for a in range(spec.adversarial_count):
        rows = []
        for _ in range(spec.rows_per_table):
            qi = int(rng.integers(n))
            rows.append((
                _key_variant(keys[qi], spec.overlap_rate, rng),
                repr(float(rng.normal(50.0, 10.0))),
                str(rng.choice(_ADV_WORDS)),
            ))
        tables.append(TargetTable(
            id=f"adv{a:03d}",
            title=f"orchid greenhouse log {a}",
            context="bloom and pollen records",
            column_names=("specimen", "petal count", "bloom"),
            rows=tuple(rows)))

    noise_count = spec.table_count - spec.signal_count - spec.adversarial_count
    noise_tokens = _numbered_tokens(_NOISE_KEY_BASE,
                                    max(3 * spec.rows_per_table, 30))
    for i in range(noise_count):
        rows = []
        for _ in range(spec.rows_per_table):
            picks = rng.choice(len(noise_tokens), size=3, replace=False)
            rows.append((
                " ".join(noise_tokens[int(p)] for p in picks),
                repr(float(rng.normal(0.0, 1.0))),
                str(rng.choice(_NOISE_WORDS)),
            ))
        tables.append(TargetTable(
            id=f"noise{i:03d}",
            title=f"{_NOISE_WORDS[i % len(_NOISE_WORDS)]} survey {i}",
            context="deep field observations",
            column_names=("object", "reading", "class"),
            rows=tuple(rows)))

    return GeneratedLake(query=query,
                         corpus=Corpus.from_tables(tables),
                         truth=truth)


# ---------------------------------------------------------------- reports

def _display_name(mode: str) -> str:
    return mode.replace("_", "-")


def _report_cells(result: RunResult) -> tuple[str, str, str, str]:
    score = f"{result.after.mean:.4f} ± {result.after.std:.4f}"
    if result.config.mode == "no_enrich":
        return (_display_name(result.config.mode), score, "-", "-")
    seconds = result.enrichment_seconds
    return (_display_name(result.config.mode), score,
            f"{result.improvement_pct:+.2f}%",
            f"{seconds:.3f}" if seconds is not None else "-")


@dataclass(frozen=True)
class Comparison:
    """Side-by-side run results with tabular renderings."""

    results: tuple[RunResult, ...]

    _HEADER = ("Method", "Score", "Improvement", "Time(s)")

    def to_csv(self) -> str:
        lines = [",".join(self._HEADER)]
        lines.extend(",".join(_report_cells(r)) for r in self.results)
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        rows = [self._HEADER] + [_report_cells(r) for r in self.results]
        widths = [max(len(row[c]) for row in rows) for c in range(4)]
        out = []
        for row in rows:
            out.append("  ".join(cell.ljust(w)
                                 for cell, w in zip(row, widths)).rstrip())
        return "\n".join(out) + "\n"


def compare_modes(configs: list[RunConfig], query: QueryTable, corpus: Corpus,
                  index: JoinIndex,
                  on_stage: Callable[[str], None] | None = None) -> Comparison:
    """Run each config against the same inputs and collect a comparison."""
    return Comparison(tuple(run(c, query, corpus, index, on_stage=on_stage)
                            for c in configs))


# ---------------------------------------------------------------- persistence

def persist_run(result: RunResult, runs_dir: str | Path,
                run_id: str | None = None) -> Path:
    """Write result.json and enriched.csv under runs_dir/<run_id>/."""
    run_id = run_id or uuid.uuid4().hex
    out = Path(runs_dir) / run_id
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(
        json.dumps(result.to_json(), ensure_ascii=False, indent=1),
        encoding="utf-8")
    (out / "enriched.csv").write_bytes(result.enriched.to_csv_bytes())
    return out
