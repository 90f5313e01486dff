"""Job-oriented HTTP API over the enrichment engine.

One immutable index/corpus pair per instance; uploads and finished runs live
under a data directory so a restarted service can keep serving them.  Jobs
execute on a small thread pool and publish their progress as monotone state
transitions that clients poll.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import JSONResponse, RedirectResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import TableLiftError
from .lakeindex import JoinIndex
from .mlkit import record_diffs
from .pipeline import RunConfig, _validate_config, persist_run, run
from .tablecore import load_query_table

STATES = ("queued", "searching", "selecting", "aligning", "evaluating",
          "done", "failed")
_TERMINAL = ("done", "failed")
DEFAULT_UPLOAD_CAP = 50 * 1024 * 1024


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class _Job:
    id: str
    state: str
    config: dict
    submit: dict
    created_at: str
    updated_at: str
    error: str | None = None


class JobRequest(BaseModel):
    table_token: str
    key_column: str
    task_column: str
    task_kind: str = "regression"
    config: dict = Field(default_factory=dict)


class _Registry:
    """Job records guarded by one lock; every write also lands in job.json."""

    def __init__(self, runs_dir: Path):
        self.runs_dir = runs_dir
        self.lock = threading.Lock()
        self.jobs: dict[str, _Job] = {}

    def _persist(self, job: _Job) -> None:
        job_dir = self.runs_dir / job.id
        job_dir.mkdir(parents=True, exist_ok=True)
        (job_dir / "job.json").write_text(
            json.dumps(dataclasses.asdict(job), ensure_ascii=False, indent=1),
            encoding="utf-8")

    def add(self, job: _Job) -> None:
        with self.lock:
            self.jobs[job.id] = job
            self._persist(job)

    def active_count(self) -> int:
        with self.lock:
            return sum(1 for j in self.jobs.values()
                       if j.state not in _TERMINAL)

    def advance(self, job_id: str, state: str, error: str | None = None) -> None:
        with self.lock:
            job = self.jobs[job_id]
            if job.state in _TERMINAL:
                return
            if state != "failed" and STATES.index(state) < STATES.index(job.state):
                return
            job.state = state
            job.error = error
            job.updated_at = _now()
            self._persist(job)

    def snapshot(self, job_id: str) -> dict | None:
        with self.lock:
            job = self.jobs.get(job_id)
            return dataclasses.asdict(job) if job else None

    def load_existing(self) -> None:
        """Reload persisted jobs; anything mid-flight died with the old process."""
        if not self.runs_dir.is_dir():
            return
        for job_file in sorted(self.runs_dir.glob("*/job.json")):
            try:
                data = json.loads(job_file.read_text(encoding="utf-8"))
                job = _Job(**data)
            except (OSError, json.JSONDecodeError, TypeError, ValueError):
                continue
            if job.state not in _TERMINAL:
                job.state = "failed"
                job.error = "interrupted by service restart"
                job.updated_at = _now()
            with self.lock:
                self.jobs[job.id] = job
                self._persist(job)


def _parse_upload(data: bytes) -> tuple[list[str], list[list[str]]]:
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise HTTPException(400, f"upload is not valid UTF-8: {exc}")
    try:
        records = [r for r in csv.reader(io.StringIO(text)) if r]
    except csv.Error as exc:
        raise HTTPException(400, f"upload failed to parse as CSV: {exc}")
    if len(records) < 2:
        raise HTTPException(400, "CSV needs a header row and at least one data row")
    header, rows = records[0], records[1:]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise HTTPException(
                400, f"row {i + 1} has {len(row)} cells, expected {len(header)}")
    return header, rows


def create_app(index: JoinIndex, *, data_dir: str | Path | None = None,
               max_workers: int = 2, queue_limit: int = 16,
               upload_cap_bytes: int = DEFAULT_UPLOAD_CAP,
               ui_dir: str | Path | None = None) -> FastAPI:
    """Wire one service instance around a loaded index.

    `data_dir` (or $TABLELIFT_DATA_DIR) holds uploads/ and runs/; both are
    reloaded on startup.  At most `max_workers` jobs execute concurrently and
    at most `queue_limit` may be waiting or running at once.
    """
    data_dir = Path(data_dir or os.environ.get("TABLELIFT_DATA_DIR",
                                               "tablelift-data"))
    uploads_dir = data_dir / "uploads"
    runs_dir = data_dir / "runs"
    uploads_dir.mkdir(parents=True, exist_ok=True)
    runs_dir.mkdir(parents=True, exist_ok=True)

    registry = _Registry(runs_dir)
    registry.load_existing()
    executor = ThreadPoolExecutor(max_workers=max_workers,
                                  thread_name_prefix="tablelift-job")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        executor.shutdown(wait=True, cancel_futures=True)

    app = FastAPI(title="tablelift", lifespan=lifespan)
    app.state.index = index
    app.state.corpus = index.corpus
    app.state.executor = executor
    app.state.registry = registry

    corpus = index.corpus

    def get_job_or_404(job_id: str) -> dict:
        snap = registry.snapshot(job_id)
        if snap is None:
            raise HTTPException(404, f"no job {job_id!r}")
        return snap

    def get_done_job(job_id: str) -> dict:
        snap = get_job_or_404(job_id)
        if snap["state"] != "done":
            raise HTTPException(
                409, f"job {job_id!r} is {snap['state']}, not done")
        return snap

    def result_payload(job_id: str) -> dict:
        path = runs_dir / job_id / "result.json"
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise HTTPException(500, f"result file missing: {exc}")

    # -------------------------------------------------------------- uploads

    @app.post("/api/tables")
    async def upload_table(file: UploadFile = File(...)):
        data = await file.read()
        if len(data) > upload_cap_bytes:
            raise HTTPException(
                413, f"upload exceeds {upload_cap_bytes} byte cap")
        header, rows = _parse_upload(data)
        token = uuid.uuid4().hex
        (uploads_dir / f"{token}.csv").write_bytes(data)
        return {"token": token, "columns": header, "row_count": len(rows),
                "preview": rows[:20]}

    # -------------------------------------------------------------- jobs

    @app.post("/api/jobs", status_code=202)
    def submit_job(req: JobRequest):
        upload_path = uploads_dir / f"{req.table_token}.csv"
        if not upload_path.is_file():
            raise HTTPException(400, f"unknown table token {req.table_token!r}")
        try:
            query = load_query_table(upload_path.read_bytes(), req.key_column,
                                     req.task_column, req.task_kind)
        except (TableLiftError, ValueError) as exc:
            raise HTTPException(400, str(exc))
        try:
            config = RunConfig(**req.config)
            _validate_config(config)
        except TypeError as exc:
            raise HTTPException(400, f"bad config field: {exc}")
        except (TableLiftError, ValueError) as exc:
            raise HTTPException(400, str(exc))

        if registry.active_count() >= queue_limit:
            raise HTTPException(503, "job queue is full, retry later")

        job_id = uuid.uuid4().hex
        now = _now()
        registry.add(_Job(
            id=job_id, state="queued",
            config=dataclasses.asdict(config),
            submit={"table_token": req.table_token,
                    "key_column": req.key_column,
                    "task_column": req.task_column,
                    "task_kind": req.task_kind},
            created_at=now, updated_at=now))

        def execute():
            try:
                result = run(config, query, corpus, index,
                             on_stage=lambda s: registry.advance(job_id, s))
                persist_run(result, runs_dir, run_id=job_id)
                registry.advance(job_id, "done")
            except Exception as exc:
                registry.advance(job_id, "failed", error=str(exc))

        executor.submit(execute)
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        snap = get_job_or_404(job_id)
        done = snap["state"] == "done"
        return {
            "id": snap["id"],
            "state": snap["state"],
            "error": snap["error"],
            "created_at": snap["created_at"],
            "updated_at": snap["updated_at"],
            "config": snap["config"],
            "submit": snap["submit"],
            "result_available": done,
            "result_url": f"/api/jobs/{job_id}/results" if done else None,
        }

    @app.get("/api/jobs/{job_id}/results")
    def get_results(job_id: str):
        get_done_job(job_id)
        payload = result_payload(job_id)
        return {key: payload[key] for key in (
            "config", "stage_seconds", "before", "after", "improvement_pct",
            "importance", "candidate_counts", "tables_used",
            "model_kind_used")}

    @app.get("/api/jobs/{job_id}/provenance")
    def get_provenance(job_id: str):
        get_done_job(job_id)
        payload = result_payload(job_id)
        contributed: dict[str, list[str]] = {}
        for column in payload["provenance"]:
            for source in column["sources"]:
                names = contributed.setdefault(source["table_id"], [])
                if source["column"] not in names:
                    names.append(source["column"])
        entries = []
        for ts in payload["table_scores"]:
            table = corpus.get(ts["table_id"])
            entries.append({
                "table_id": table.id,
                "title": table.title,
                "context": table.context,
                "source_url": table.source_url,
                "score": ts["score"],
                "columns": contributed.get(table.id, []),
            })
        return JSONResponse(entries)

    @app.get("/api/jobs/{job_id}/enriched.csv")
    def get_enriched(job_id: str):
        get_done_job(job_id)
        path = runs_dir / job_id / "enriched.csv"
        return Response(
            content=path.read_bytes(), media_type="text/csv",
            headers={"Content-Disposition":
                     'attachment; filename="enriched.csv"'})

    @app.get("/api/jobs/{job_id}/diffs")
    def get_diffs(job_id: str, filter: str = "all"):
        if filter not in ("all", "fixed", "broken"):
            raise HTTPException(
                400, f"filter must be all, fixed, or broken, got {filter!r}")
        get_done_job(job_id)
        payload = result_payload(job_id)
        task_kind = payload["before"]["task_kind"]
        if task_kind != "classification":
            return {"supported": False,
                    "reason": "prediction diffs exist for classification only"}
        preds = payload["predictions"]
        diffs = record_diffs(preds["before"], preds["after"], preds["truth"],
                             "classification")
        counts = {flag: sum(1 for d in diffs if d["flag"] == flag)
                  for flag in ("fixed", "broken", "both-wrong-changed")}
        shown = diffs if filter == "all" else [d for d in diffs
                                               if d["flag"] == filter]
        return {"supported": True, "filter": filter, "counts": counts,
                "diffs": shown}

    # -------------------------------------------------------------- static UI

    ui_path = Path(ui_dir or os.environ.get("TABLELIFT_UI_DIR",
                                            "frontend/dist"))
    if ui_path.is_dir():
        app.mount("/ui", StaticFiles(directory=ui_path, html=True), name="ui")

        @app.get("/", include_in_schema=False)
        def root():
            return RedirectResponse("/ui/")

    return app
