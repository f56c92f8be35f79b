"""HTTP query service: level-specific viewport payloads, search, view-state
changes, asynchronous feedback jobs with long-poll progress, provenance
access, and undo. Plain JSON request/response over HTTP; fine-tune jobs run
off the request path against copied snapshots, so concurrent reads keep
serving the last committed state until an accept lands.
"""

from __future__ import annotations

import functools
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import json as _json

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import Response

from .config import EngineConfig
from .engine import BudgetExceeded, DataBundle, Engine, ReplayIncompatibility
from .feedback import TransactionStateError
from .provenance import ProvenanceLog


@dataclass
class FeedbackJob:
    job_id: str
    session_id: str
    state: str = "running"  # running | preview-ready | failed
    error: str | None = None


@dataclass
class SessionSlot:
    engine: Engine
    lock: threading.RLock = field(default_factory=threading.RLock)


class ServiceState:
    """Shared data plus per-session engines and the feedback job registry."""

    def __init__(
        self,
        bundle: DataBundle,
        config: EngineConfig | None = None,
        seed: int | None = None,
        data_dir: str | Path | None = None,
    ):
        self.bundle = bundle
        self.config = config or EngineConfig()
        self.data_dir = Path(data_dir) if data_dir else None
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        base_log = self._log_path("base")
        self.base = Engine(bundle, self.config, log=base_log and ProvenanceLog(base_log))
        self.base.train_model(seed=seed)
        train_events = [e for e in self.base.log.events if e.kind == "train"]
        self.base_train_payload = train_events[-1].payload
        self.sessions: dict[str, SessionSlot] = {}
        self.jobs: dict[str, FeedbackJob] = {}
        self.registry_lock = threading.Lock()

    def _log_path(self, name: str) -> Path | None:
        if self.data_dir is None:
            return None
        return self.data_dir / f"{name}.provenance.ndjson"

    def create_session(self) -> SessionSlot:
        session_id = uuid.uuid4().hex[:12]
        log_path = self._log_path(f"session-{session_id}")
        engine = Engine(
            self.bundle,
            self.config,
            log=ProvenanceLog(log_path) if log_path else None,
            session_id=session_id,
        )
        engine.adopt_trained_state(self.base, self.base_train_payload)
        slot = SessionSlot(engine)
        with self.registry_lock:
            self.sessions[session_id] = slot
        return slot

    def slot(self, session_id: str) -> SessionSlot:
        with self.registry_lock:
            if session_id not in self.sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
            return self.sessions[session_id]


def _http_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HTTPException:
            raise
        except BudgetExceeded as exc:
            raise HTTPException(status_code=413, detail=str(exc))
        except TransactionStateError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ReplayIncompatibility as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except IndexError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    return wrapper


def _fast_json(payload: dict) -> Response:
    """Serialize straight to JSON, skipping FastAPI's recursive encoder walk
    (which costs >100 ms on 256k-cell payloads and would blow the latency
    budget)."""
    return Response(
        content=_json.dumps(payload, separators=(",", ":")),
        media_type="application/json",
    )


def _session_info(engine: Engine) -> dict:
    state = engine.committed
    implicit = engine.data.implicit
    return {
        "session_id": engine.session_id,
        "n": implicit.n,
        "m": implicit.m,
        "timesteps": [t.label for t in implicit.times],
        "horizons": engine.config.horizons,
        "threshold": engine.threshold,
        "snapshot_id": state.snapshot_id if state else None,
        "previewing": engine.pending_tx is not None,
        "hierarchy_versions": {axis: tree.version for axis, tree in engine.trees.items()},
        "active_ordering": dict(engine.active_ordering),
        "level_budgets": {
            "level1_cells": engine.config.level1_cell_budget,
            "documents_page_default": engine.config.page_size_documents,
            "documents_page_max": engine.config.max_page_size_documents,
        },
        "axis": engine.axis_descriptors() if state else None,
        "kernel_backend": engine.log.backend or None,
    }


def create_app(state: ServiceState, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="hyperscope", version="0.1.0")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(static_dir), html=True), name="ui")

    @app.get("/session")
    @_http_errors
    def get_session(session: str | None = Query(default=None)):
        slot = state.slot(session) if session else state.create_session()
        with slot.lock:
            return _session_info(slot.engine)

    @app.get("/viewport")
    @_http_errors
    def get_viewport(
        session: str,
        level: int,
        row0: int = 0,
        row1: int = 0,
        col0: int = 0,
        col1: int = 0,
        t: int | None = None,
        mode: str = "predictions",
        page: int = 0,
        page_size: int | None = None,
    ):
        slot = state.slot(session)
        return _fast_json(slot.engine.viewport(
            level, row0, row1, col0, col1, t=t, mode=mode, page=page, page_size=page_size
        ))

    @app.get("/cell/{r}/{c}/{what}")
    @_http_errors
    def get_cell(
        r: int,
        c: int,
        what: str,
        session: str,
        t: int | None = None,
        page: int = 0,
        page_size: int | None = None,
    ):
        slot = state.slot(session)
        return slot.engine.cell_detail(r, c, what, t=t, page=page, page_size=page_size)

    @app.get("/search")
    @_http_errors
    def get_search(session: str, q: str, limit: int = 20, offset: int = 0):
        slot = state.slot(session)
        with slot.lock:
            return slot.engine.search(q, limit=limit, offset=offset)

    @app.post("/view")
    @_http_errors
    def post_view(payload: dict = Body(...)):
        slot = state.slot(payload.get("session", ""))
        changes = [k for k in (
            "threshold", "ordering", "hierarchy_edit", "collapse", "annotation", "marking"
        ) if k in payload]
        if len(changes) != 1:
            raise HTTPException(
                status_code=400,
                detail="POST /view takes exactly one change per request",
            )
        change = changes[0]
        with slot.lock:
            engine = slot.engine
            result: dict = {"ok": True, "change": change}
            if change == "threshold":
                engine.set_threshold(float(payload["threshold"]))
                result["threshold"] = engine.threshold
            elif change == "ordering":
                spec = payload["ordering"]
                ordering_id, ordering = engine.request_ordering(
                    spec["axis"],
                    spec["strategy"],
                    spec.get("metric"),
                    spec.get("linkage"),
                    bool(spec.get("respect_filter", False)),
                )
                result["ordering_id"] = ordering_id
                result["permutation"] = list(ordering.permutation)
            elif change == "hierarchy_edit":
                spec = payload["hierarchy_edit"]
                tree = engine.edit_hierarchy(spec["axis"], spec["edit"])
                result["hierarchy_version"] = tree.version
            elif change == "collapse":
                spec = payload["collapse"]
                tree = engine.edit_hierarchy(
                    spec["axis"],
                    {"op": "set_collapse", "group": spec["group"],
                     "collapsed": bool(spec["collapsed"])},
                )
                result["hierarchy_version"] = tree.version
            elif change == "annotation":
                spec = payload["annotation"]
                engine.annotate(spec.get("target", {}), spec["text"])
            elif change == "marking":
                spec = payload["marking"]
                engine.mark(int(spec["row"]), int(spec["col"]), bool(spec["starred"]))
            result["axis"] = engine.axis_descriptors()
            return result

    @app.post("/feedback")
    @_http_errors
    def post_feedback(payload: dict = Body(...)):
        slot = state.slot(payload.get("session", ""))
        assertions = [tuple(a) for a in payload.get("assertions", [])]
        engine = slot.engine
        with slot.lock:
            engine.reserve_preview()  # sync conflict detection
        job = FeedbackJob(job_id=uuid.uuid4().hex[:12], session_id=engine.session_id)
        with state.registry_lock:
            state.jobs[job.job_id] = job

        def run() -> None:
            try:
                with slot.lock:
                    engine.submit_feedback(assertions, reserved=True)
                job.state = "preview-ready"
            except Exception as exc:  # surfaced through the job, not the request
                engine.cancel_preview()
                job.state = "failed"
                job.error = str(exc)

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job.job_id, "state": job.state}

    @app.get("/feedback/job/{job_id}")
    @_http_errors
    def get_job(job_id: str, wait_ms: int = 0):
        with state.registry_lock:
            if job_id not in state.jobs:
                raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
            job = state.jobs[job_id]
        deadline = time.monotonic() + wait_ms / 1000.0
        while job.state == "running" and time.monotonic() < deadline:
            time.sleep(0.01)
        out = {"job_id": job.job_id, "state": job.state, "session": job.session_id}
        if job.error:
            out["error"] = job.error
        if job.state == "preview-ready":
            slot = state.slot(job.session_id)
            tx = slot.engine.pending_tx
            if tx is not None:
                out["change"] = {
                    "before": tx.change.before_ref,
                    "after": tx.change.after_ref,
                    "max_abs_delta": float(abs(tx.change.data).max()),
                }
        return out

    @app.post("/feedback/resolve")
    @_http_errors
    def post_resolve(payload: dict = Body(...)):
        slot = state.slot(payload.get("session", ""))
        decision = payload.get("decision", "")
        with slot.lock:
            committed = slot.engine.resolve_feedback(decision)
            return {
                "decision": decision,
                "snapshot_id": committed.snapshot_id,
                "state_digest": slot.engine.state_digest(),
            }

    @app.get("/provenance")
    @_http_errors
    def get_provenance(session: str):
        slot = state.slot(session)
        engine = slot.engine
        return {
            "head": engine.head,
            "events": [e.to_record() for e in engine.log.events],
        }

    @app.post("/provenance/undo")
    @_http_errors
    def post_undo(payload: dict = Body(...)):
        slot = state.slot(payload.get("session", ""))
        with slot.lock:
            slot.engine = slot.engine.undo()
            return {
                "head": slot.engine.head,
                "snapshot_id": slot.engine.committed.snapshot_id
                if slot.engine.committed
                else None,
                "state_digest": slot.engine.state_digest(),
            }

    @app.get("/snapshot/{snapshot_id}")
    @_http_errors
    def get_snapshot(snapshot_id: str, session: str):
        slot = state.slot(session)
        snaps = slot.engine.snapshots
        if snapshot_id not in snaps:
            raise HTTPException(status_code=404, detail=f"unknown snapshot {snapshot_id}")
        return snaps[snapshot_id]

    return app
