"""Data model for query and target tables plus corpus ingestion.

Cells are raw strings everywhere; typing is deferred to vectorization.
Missing input cells become empty strings so emptiness statistics stay
well-defined downstream.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptyCorpus, IoError, KeyEqualsTask, MalformedCsv, UnknownColumn

TASK_KINDS = ("regression", "classification")


def _check_rectangular(column_names, rows, what: str) -> None:
    width = len(column_names)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise MalformedCsv(f"{what}: row {i} has {len(row)} cells, expected {width}")


@dataclass(frozen=True)
class QueryTable:
    """The user's table: a join-key column plus a prediction target column."""

    column_names: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    key_column: int
    task_column: int
    task_kind: str

    def __post_init__(self):
        if not self.rows:
            raise MalformedCsv("query table needs at least one data row")
        _check_rectangular(self.column_names, self.rows, "query table")
        n = len(self.column_names)
        if not (0 <= self.key_column < n and 0 <= self.task_column < n):
            raise UnknownColumn(
                f"column index out of range (have {n} columns, "
                f"key={self.key_column}, task={self.task_column})")
        if self.key_column == self.task_column:
            raise KeyEqualsTask("key column and task column must differ")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"task_kind must be one of {TASK_KINDS}, got {self.task_kind!r}")

    @property
    def key_name(self) -> str:
        return self.column_names[self.key_column]

    @property
    def task_name(self) -> str:
        return self.column_names[self.task_column]


@dataclass(frozen=True)
class TargetTable:
    """A lake table: data rows plus searchable metadata."""

    id: str
    title: str
    context: str
    column_names: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    source_url: str | None = None

    def __post_init__(self):
        if not self.id:
            raise MalformedCsv("target table id must be non-empty")
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        _check_rectangular(self.column_names, self.rows, f"table {self.id}")


@dataclass(frozen=True)
class Corpus:
    """Immutable id-addressable collection of target tables."""

    tables: dict[str, TargetTable]
    skipped_count: int = 0

    @classmethod
    def from_tables(cls, tables: Iterable[TargetTable], skipped_count: int = 0) -> "Corpus":
        by_id: dict[str, TargetTable] = {}
        for t in tables:
            if t.id in by_id:
                raise MalformedCsv(f"duplicate table id {t.id!r}")
            by_id[t.id] = t
        if not by_id:
            raise EmptyCorpus("corpus contains no tables")
        return cls(tables=dict(sorted(by_id.items())), skipped_count=skipped_count)

    def get(self, table_id: str) -> TargetTable:
        return self.tables[table_id]

    def __contains__(self, table_id: str) -> bool:
        return table_id in self.tables

    def __iter__(self) -> Iterator[TargetTable]:
        return iter(self.tables.values())

    def __len__(self) -> int:
        return len(self.tables)

    @property
    def total_rows(self) -> int:
        return sum(len(t.rows) for t in self.tables.values())


def load_query_table(csv_bytes: bytes, key_column_name: str,
                     task_column_name: str, task_kind: str) -> QueryTable:
    """Parse an uploaded CSV (header row required) into a QueryTable."""
    try:
        text = csv_bytes.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedCsv(f"query CSV is not valid UTF-8: {exc}") from exc
    try:
        records = list(csv.reader(io.StringIO(text)))
    except csv.Error as exc:
        raise MalformedCsv(f"query CSV failed to parse: {exc}") from exc
    records = [r for r in records if r]  # csv yields [] for blank trailing lines
    if not records:
        raise MalformedCsv("query CSV is empty")
    header, data = records[0], records[1:]
    if not data:
        raise MalformedCsv("query CSV has a header but no data rows")
    for i, row in enumerate(data):
        if len(row) != len(header):
            raise MalformedCsv(
                f"query CSV row {i + 1} has {len(row)} cells, expected {len(header)}")

    def resolve(name: str) -> int:
        try:
            return header.index(name)
        except ValueError:
            raise UnknownColumn(f"column {name!r} not in header {header}") from None

    return QueryTable(
        column_names=tuple(header),
        rows=tuple(tuple(r) for r in data),
        key_column=resolve(key_column_name),
        task_column=resolve(task_column_name),
        task_kind=task_kind,
    )


def _cell_from_json(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise MalformedCsv(f"boolean cell {value!r} not supported")
    if isinstance(value, (int, float)):
        return str(value)
    raise MalformedCsv(f"cell {value!r} is not a string or number")


def _table_from_json(obj: dict) -> TargetTable:
    if not isinstance(obj, dict):
        raise MalformedCsv("table file must contain a JSON object")
    for key in ("id", "title", "context", "columns", "rows"):
        if key not in obj:
            raise MalformedCsv(f"table file missing field {key!r}")
    rows = tuple(tuple(_cell_from_json(c) for c in row) for row in obj["rows"])
    source_url = obj.get("source_url")
    if source_url is not None and not isinstance(source_url, str):
        raise MalformedCsv("source_url must be a string or null")
    return TargetTable(
        id=str(obj["id"]),
        title=str(obj["title"]),
        context=str(obj["context"]),
        column_names=tuple(str(c) for c in obj["columns"]),
        rows=rows,
        source_url=source_url,
    )


def load_corpus(directory: str | Path) -> Corpus:
    """Load every `*.table.json` under a directory.

    Files that fail validation (ragged rows, missing fields, duplicate ids,
    bad JSON) are skipped and counted, never fatal.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IoError(f"corpus directory {directory} does not exist")
    tables: dict[str, TargetTable] = {}
    skipped = 0
    for path in sorted(directory.glob("*.table.json")):
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            table = _table_from_json(obj)
        except (OSError, json.JSONDecodeError, MalformedCsv, UnicodeDecodeError):
            skipped += 1
            continue
        if table.id in tables:
            skipped += 1
            continue
        tables[table.id] = table
    if not tables:
        raise EmptyCorpus(f"no valid tables under {directory}")
    return Corpus(tables=dict(sorted(tables.items())), skipped_count=skipped)


def target_table_to_json(t: TargetTable) -> dict:
    return {
        "id": t.id,
        "title": t.title,
        "context": t.context,
        "columns": list(t.column_names),
        "rows": [list(r) for r in t.rows],
        "source_url": t.source_url,
    }


def save_target_table(t: TargetTable, path: str | Path) -> None:
    """Write one table in the corpus file format (round-trips with load_corpus)."""
    Path(path).write_text(
        json.dumps(target_table_to_json(t), ensure_ascii=False, indent=1),
        encoding="utf-8",
    )
