"""Turn join-search hits into new feature columns on a query table.

The flow is: search the index once per query row (`join_row_search`), pick
which tables look on-topic (`select_tables`), commit to one row per
(query row, table) pair (`map_rows`), lay the non-join columns of those rows
alongside the query (`assemble_draft`), and finally merge near-duplicate
columns (`aggregate_columns`).  Cell conflicts inside a merged column are
settled by `resolve_conflicts`, which understands simple currency and
percentage notation via `normalize_numeric`.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import lakeindex
from .errors import (
    EmptyQuery,
    IndexEmpty,
    InvalidClusterCount,
    InvalidCount,
    InvalidThreshold,
)
from .lakeindex import JoinIndex, SearchHit
from .tablecore import Corpus, QueryTable, TargetTable
from .textenc import Embedding, HashedSubwordProvider, cosine_similarity, embed, tokenize

# ties between measures claiming the same target row resolve in this order
_MEASURE_PRIORITY = {"jaccard": 0, "bm25": 1, "semantic": 2}

_CURRENCY = {"$": "USD", "€": "EUR", "£": "GBP", "¥": "JPY"}
_SCALE = {"k": 1e3, "m": 1e6, "b": 1e9}
_NUMERIC_RE = re.compile(
    r"\s*(?P<pre>[$€£¥])?\s*"
    r"(?P<num>-?(?:\d+(?:\.\d+)?|\.\d+))\s*"
    r"(?P<scale>[KkMmBb])?\s*"
    r"(?P<suf>[$€£¥%])?\s*")


@dataclass(frozen=True)
class CandidateMatch:
    """One search hit tied back to the query row that produced it."""

    query_row: int
    hit: SearchHit


@dataclass(frozen=True)
class TableScore:
    table_id: str
    score: float


@dataclass(frozen=True)
class UnitValue:
    """A parsed numeric cell: magnitude after scaling, plus the unit label."""

    magnitude: float
    unit: str
    scale_applied: float


@dataclass(frozen=True)
class EnrichedColumn:
    """A new column with a record of which source columns fed it."""

    name: str
    provenance: tuple[tuple[str, str], ...]  # (table_id, column_name)
    cells: tuple[str, ...]


@dataclass(frozen=True)
class EnrichedTable:
    base: QueryTable
    enriched_columns: tuple[EnrichedColumn, ...] = field(default=())
    aggregation: str | None = None

    @property
    def combined_column_names(self) -> tuple[str, ...]:
        return self.base.column_names + tuple(c.name for c in self.enriched_columns)

    def combined_rows(self) -> list[tuple[str, ...]]:
        out = []
        for i, row in enumerate(self.base.rows):
            extra = tuple(c.cells[i] for c in self.enriched_columns)
            out.append(tuple(row) + extra)
        return out

    def to_csv_bytes(self) -> bytes:
        import csv
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.combined_column_names)
        writer.writerows(self.combined_rows())
        return buf.getvalue().encode("utf-8")

    def provenance_payload(self) -> list[dict]:
        return [
            {
                "name": c.name,
                "sources": [{"table_id": t, "column": n} for t, n in c.provenance],
                "strategy": self.aggregation or "none",
            }
            for c in self.enriched_columns
        ]


# ---------------------------------------------------------------- stage 1

def join_row_search(index: JoinIndex, query: QueryTable, k: int) -> list[CandidateMatch]:
    """Search every query row's key text with all three measures, then union.

    A target row found by several measures is kept once, crediting the most
    reliable measure that saw it (jaccard before bm25 before semantic) with
    that measure's best score.  Rows whose key text has no tokens match
    nothing: a semantic scan of the zero vector would return arbitrary
    neighbors, which is worse than returning nothing.
    """
    if index.doc_count == 0:
        raise IndexEmpty("index contains no documents")
    if k < 1:
        raise InvalidCount(f"k must be positive, got {k}")
    searches = (lakeindex.search_jaccard, lakeindex.search_bm25,
                lakeindex.search_semantic)
    out: list[CandidateMatch] = []
    for row_idx, row in enumerate(query.rows):
        key_text = row[query.key_column]
        if not tokenize(key_text).ordered:
            continue
        best: dict[tuple[str, int], SearchHit] = {}
        for search in searches:
            try:
                hits = search(index, key_text, k)
            except EmptyQuery:
                continue
            for hit in hits:
                best.setdefault((hit.doc.table_id, hit.doc.row_index), hit)
        out.extend(CandidateMatch(row_idx, hit) for hit in best.values())
    return out


# ---------------------------------------------------------------- stage 2

def generate_query_texts(query: QueryTable,
                         entity_name: str | None = None,
                         task_description: str | None = None) -> list[str]:
    """Short texts describing what the query table is about.

    Always includes the comma-joined column names; optionally an
    "<entity> <task column>" phrase and a free-form description.
    """
    texts = [", ".join(query.column_names)]
    if entity_name is not None:
        texts.append(f"{entity_name} {query.task_name}".lower())
    if task_description is not None:
        texts.append(task_description)
    return texts


def _target_texts(table: TargetTable) -> list[str]:
    return [table.title, table.context, ", ".join(table.column_names)]


def _score_against(query_vecs: list[Embedding], table: TargetTable,
                   provider) -> float:
    best = 0.0
    for text in _target_texts(table):
        tv = embed(text, provider)
        for qv in query_vecs:
            best = max(best, cosine_similarity(qv, tv))
    return best


def score_table(query_texts: list[str], table: TargetTable, provider) -> TableScore:
    """Best cosine between any query text and any metadata text of the table."""
    if not query_texts:
        raise EmptyQuery("no query texts to score against")
    vecs = [embed(t, provider) for t in query_texts]
    return TableScore(table.id, _score_against(vecs, table, provider))


def select_tables(candidate_ids: list[str], query_texts: list[str],
                  corpus: Corpus, provider, m: int) -> list[TableScore]:
    """Rank candidate tables by metadata relevance; keep the top m."""
    if m < 1:
        raise InvalidCount(f"m must be positive, got {m}")
    if not query_texts:
        raise EmptyQuery("no query texts to score against")
    vecs = [embed(t, provider) for t in query_texts]
    scored = [TableScore(tid, _score_against(vecs, corpus.get(tid), provider))
              for tid in dict.fromkeys(candidate_ids)]
    scored.sort(key=lambda ts: (-ts.score, ts.table_id))
    return scored[:m]


# ---------------------------------------------------------------- stage 3

def _match_rank(m: CandidateMatch) -> tuple[int, float, int]:
    return (_MEASURE_PRIORITY[m.hit.measure], -m.hit.score, m.hit.doc.row_index)


def map_rows(matches: list[CandidateMatch],
             selected_ids: set[str] | None) -> dict[tuple[int, str], CandidateMatch]:
    """Commit to at most one target row per (query row, table) pair.

    `selected_ids=None` keeps every table the search touched; otherwise
    matches outside the selected set are dropped.
    """
    kept: dict[tuple[int, str], CandidateMatch] = {}
    for m in matches:
        tid = m.hit.doc.table_id
        if selected_ids is not None and tid not in selected_ids:
            continue
        spot = (m.query_row, tid)
        cur = kept.get(spot)
        if cur is None or _match_rank(m) < _match_rank(cur):
            kept[spot] = m
    return kept


def assemble_draft(query: QueryTable,
                   mapped: dict[tuple[int, str], CandidateMatch],
                   corpus: Corpus) -> EnrichedTable:
    """Lay the non-join columns of every mapped table beside the query rows.

    The column a table was joined on carries no new information, so each
    table contributes its remaining columns; query rows with no mapping in a
    table get empty cells there.
    """
    n_rows = len(query.rows)
    columns: list[EnrichedColumn] = []
    for tid in sorted({tid for (_, tid) in mapped}):
        table = corpus.get(tid)
        join_cols = {m.hit.doc.column_index
                     for (r, t), m in mapped.items() if t == tid}
        for ci in range(len(table.column_names)):
            if ci in join_cols:
                continue
            cells = []
            for r in range(n_rows):
                m = mapped.get((r, tid))
                cells.append(table.rows[m.hit.doc.row_index][ci] if m else "")
            columns.append(EnrichedColumn(
                name=table.column_names[ci],
                provenance=((tid, table.column_names[ci]),),
                cells=tuple(cells)))
    return EnrichedTable(base=query, enriched_columns=tuple(columns))


# ---------------------------------------------------------------- stage 3b

def _normalize_name(name: str) -> str:
    return " ".join(name.lower().split())


def kmeans_cluster(points: np.ndarray, k: int, seed: int,
                   max_iter: int = 100, tol: float = 1e-6):
    """Plain k-means with k-means++ seeding.

    Returns (labels, centroids, per-iteration objectives).  The objective is
    measured after each assignment step, so it never increases.
    """
    n = len(points)
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for ci in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[ci] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[ci]) ** 2).sum(axis=1))

    objectives: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = dists.argmin(axis=1)
        objectives.append(float(dists.min(axis=1).sum()))
        new_centroids = centroids.copy()
        for ci in range(k):
            members = points[labels == ci]
            if len(members):
                new_centroids[ci] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    return labels, centroids, objectives


def _group_hard(names: list[str]) -> list[list[int]]:
    groups: dict[str, list[int]] = {}
    for i, name in enumerate(names):
        groups.setdefault(_normalize_name(name), []).append(i)
    return list(groups.values())


def _group_threshold(names: list[str], tau: float) -> list[list[int]]:
    if not (0.0 < tau <= 1.0):
        raise InvalidThreshold(f"tau must be in (0, 1], got {tau}")
    parent = list(range(len(names)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    token_sets = [tokenize(n).unique for n in names]
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = token_sets[i], token_sets[j]
            union = a | b
            if union and len(a & b) / len(union) >= tau:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(names)):
        groups.setdefault(find(i), []).append(i)
    return [groups[r] for r in sorted(groups)]


def _group_soft(names: list[str], cluster_count: int | None, provider,
                seed: int) -> list[list[int]]:
    distinct = list(dict.fromkeys(_normalize_name(n) for n in names))
    if cluster_count is None:
        cluster_count = max(1, math.ceil(len(distinct) / 4))
    if cluster_count < 1:
        raise InvalidClusterCount(f"cluster count must be positive, got {cluster_count}")
    k = min(cluster_count, len(distinct))
    points = np.stack([embed(n, provider).values for n in distinct])
    labels, _, _ = kmeans_cluster(points, k, seed)
    label_of = {name: int(lab) for name, lab in zip(distinct, labels)}
    groups: dict[int, list[int]] = {}
    for i, name in enumerate(names):
        groups.setdefault(label_of[_normalize_name(name)], []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def aggregate_columns(draft: EnrichedTable, strategy: str, *,
                      tau: float = 0.6, cluster_count: int | None = None,
                      provider=None, seed: int = 0) -> EnrichedTable:
    """Merge near-duplicate draft columns into one column per group.

    hard      exact match on whitespace/case-normalized names
    threshold single-linkage on name-token Jaccard >= tau
    soft      k-means over name embeddings

    The merged column takes the group's most common normalized name (ties go
    alphabetically), and each row's cell combines the members' non-empty
    cells via `resolve_conflicts`.
    """
    cols = draft.enriched_columns
    if not cols:
        return EnrichedTable(base=draft.base, enriched_columns=(),
                             aggregation=strategy)
    names = [c.name for c in cols]
    if strategy == "hard":
        groups = _group_hard(names)
    elif strategy == "threshold":
        groups = _group_threshold(names, tau)
    elif strategy == "soft":
        groups = _group_soft(names, cluster_count,
                             provider or HashedSubwordProvider(), seed)
    else:
        raise ValueError(f"unknown aggregation strategy {strategy!r}")

    n_rows = len(draft.base.rows)
    merged: list[EnrichedColumn] = []
    for group in sorted(groups, key=lambda g: g[0]):
        members = [cols[i] for i in group]
        counts = Counter(_normalize_name(m.name) for m in members)
        top = max(counts.values())
        name = min(n for n, c in counts.items() if c == top)
        provenance = tuple(src for m in members for src in m.provenance)
        cells = []
        for r in range(n_rows):
            present = [m.cells[r] for m in members if m.cells[r] != ""]
            cells.append(resolve_conflicts(present) if present else "")
        merged.append(EnrichedColumn(name=name, provenance=provenance,
                                     cells=tuple(cells)))
    return EnrichedTable(base=draft.base, enriched_columns=tuple(merged),
                         aggregation=strategy)


# ---------------------------------------------------------------- conflicts

def normalize_numeric(text: str) -> UnitValue | None:
    """Parse "65.4$", "1K€", "17%", "-3.5" style cells; None if not numeric.

    The currency symbol may sit on either side but not both; K/M/B scale the
    magnitude by a thousand, a million, a billion.
    """
    m = _NUMERIC_RE.fullmatch(text)
    if m is None:
        return None
    pre, suf = m.group("pre"), m.group("suf")
    if pre and suf:
        return None
    scale = _SCALE[m.group("scale").lower()] if m.group("scale") else 1.0
    symbol = pre or suf
    if symbol == "%":
        unit = "percent"
    elif symbol:
        unit = _CURRENCY[symbol]
    else:
        unit = "none"
    return UnitValue(float(m.group("num")) * scale, unit, scale)


def _format_number(value: float) -> str:
    s = repr(value)
    return s[:-2] if s.endswith(".0") else s


def resolve_conflicts(cells: list[str]) -> str:
    """Combine conflicting cell values for one merged-column row.

    All values numeric in the same unit: average them.  Anything else:
    de-duplicate preserving order and join with spaces, so text disagreement
    stays visible instead of silently picking a winner.
    """
    if not cells:
        return ""
    if len(cells) == 1:
        return cells[0]
    parsed = [normalize_numeric(c) for c in cells]
    if all(p is not None for p in parsed):
        units = {p.unit for p in parsed}
        if len(units) == 1:
            mean = sum(p.magnitude for p in parsed) / len(parsed)
            return _format_number(mean)
    return " ".join(dict.fromkeys(cells))
