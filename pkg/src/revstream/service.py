"""Live session service: the open bidirectional channel over HTTP.

One POST creates a session whose agent loop starts immediately in a worker
thread; GET streams its events as server-sent frames (replay from any seq,
then live, gap-free); a second POST injects a revision into the running
session's queue without ever blocking the loop. Session state lives in
memory; the run record is available once the session terminates.
"""

from __future__ import annotations

import json
import queue as queue_mod
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from . import records as rec
from .backends.base import Backends
from .backends.mock import MockLLM
from .bench import InjectionSchedule, RunConfig, Scenario, build_scenario
from .core import Clause, EventKind, Revision, RevisionType
from .errors import ConfigError, RevstreamError, ValidationError
from .policies import Policy
from .runtime import InjectionQueue, RunRecord, run_session


class CreateSessionRequest(BaseModel):
    scenario: str
    rho: float = 0.25
    policy: str = "absorber"
    backend: str = "mock"
    length_mult: int = 1
    seed: int = 0
    step_delay: float = 0.0


class InjectRequest(BaseModel):
    preset: str | None = None  # name of a scenario fixture revision
    rtype: str | None = None
    text: str = ""
    target_clause: str | None = None
    conflict_tags: list[str] = []
    clauses: list[dict] = []


@dataclass
class Frame:
    seq: int
    kind: str
    klass: str | None
    phase: str | None
    summary: str
    spec_version: int
    action: str | None = None  # invert | compensate | fallback, compensation acts only

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind,
            "class": self.klass,
            "phase": self.phase,
            "summary": self.summary,
            "spec_version": self.spec_version,
            "action": self.action,
        }


@dataclass
class Session:
    session_id: str
    config: RunConfig
    scenario: Scenario
    step_delay: float
    status: str = "running"
    frames: list[Frame] = field(default_factory=list)
    injected: list[Revision] = field(default_factory=list)
    record: RunRecord | None = None
    queue: InjectionQueue = field(default_factory=InjectionQueue)
    subscribers: list[queue_mod.Queue] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    thread: threading.Thread | None = None
    spec_view: dict = field(default_factory=dict)

    def handle(self) -> dict:
        return {
            "session_id": self.session_id,
            "status": self.status,
            "config": {
                "scenario": self.config.scenario,
                "rho": self.config.rho,
                "rho_realized": self.scenario.realized_rho,
                "policy": self.config.policy,
                "backend": self.config.backend,
                "plan_length": self.scenario.plan_length,
            },
        }


def _frame_from_event(event, spec_version: int) -> Frame:
    payload = event.payload
    action = None
    if event.kind == EventKind.ACT:
        summary = f"{payload.get('tool')} {json.dumps(payload.get('values', {}), sort_keys=True)}"
        klass = payload.get("class") or None
        phase = payload.get("phase")
        action = payload.get("action")
    elif event.kind == EventKind.INJ:
        summary = f"{payload.get('rtype')}: {payload.get('text')}"
        klass, phase = None, None
    else:
        summary = str(payload.get("text", ""))
        klass, phase = None, None
    return Frame(
        seq=event.seq,
        kind=event.kind.value,
        klass=klass,
        phase=phase,
        summary=summary,
        spec_version=spec_version,
        action=action,
    )


class SessionManager:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, request: CreateSessionRequest) -> Session:
        try:
            Policy.parse(request.policy)
            scenario = build_scenario(request.scenario, request.rho, request.length_mult)
        except (ConfigError, ValidationError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        config = RunConfig(
            scenario=request.scenario,
            rho=request.rho,
            revision_type="live",
            policy=request.policy,
            timing="live",
            n_injections=0,
            length_mult=request.length_mult,
            seed=request.seed,
            backend=request.backend,
        )
        if request.backend == "mock":
            backends = Backends.single(MockLLM(scenario))
        elif request.backend == "chat":
            from .backends.base import BackendConfig
            from .backends.chat import ChatBackend

            try:
                backends = Backends.single(ChatBackend(BackendConfig.from_env("chat"), scenario))
            except (ConfigError, RevstreamError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        else:
            raise HTTPException(status_code=400, detail=f"unknown backend {request.backend!r}")

        session = Session(
            session_id=uuid.uuid4().hex[:12],
            config=config,
            scenario=scenario,
            step_delay=request.step_delay,
        )
        session.spec_view = _spec_view(scenario.initial_spec(), 0)

        def on_event(event, spec_version: int, spec) -> None:
            frame = _frame_from_event(event, spec_version)
            with session.lock:
                session.frames.append(frame)
                session.spec_view = _spec_view(spec, spec_version)
                for sub in session.subscribers:
                    sub.put(frame)

        def run() -> None:
            record = run_session(
                config,
                scenario,
                backends,
                schedule=InjectionSchedule(()),
                queue=session.queue,
                on_event=on_event,
                step_delay=session.step_delay,
            )
            # Judge a live session against everything actually injected.
            from .core import apply_revision

            truth = scenario.initial_spec()
            for rev in session.injected:
                truth = apply_revision(truth, rev)
            try:
                record.quality = backends.judge.judge_quality(record.world, truth)
                record.truth_spec = truth
            except RevstreamError:
                pass
            with session.lock:
                session.record = record
                session.status = "completed" if record.termination == "completed" else "failed"
                for sub in session.subscribers:
                    sub.put(None)

        session.thread = threading.Thread(target=run, daemon=True)
        with self._lock:
            self._sessions[session.session_id] = session
        session.thread.start()
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session


def _revision_from_request(scenario: Scenario, body: InjectRequest) -> Revision:
    if body.preset:
        try:
            return scenario.revision(body.preset)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
    if not body.rtype or not body.text:
        raise HTTPException(status_code=400, detail="revision needs rtype and text (or a preset)")
    try:
        clauses = tuple(
            Clause(
                clause_id=c["id"],
                text=c.get("text", ""),
                constraints=dict(c.get("constraints", {})),
            )
            for c in body.clauses
        )
        return Revision(
            rtype=RevisionType(body.rtype),
            text=body.text,
            target_clause=body.target_clause,
            conflict_tags=tuple(body.conflict_tags),
            new_clauses=clauses,
        )
    except (ValueError, KeyError, ValidationError) as exc:
        raise HTTPException(status_code=400, detail=f"malformed revision: {exc}")


def _spec_view(spec, version: int) -> dict:
    return {
        "version": version,
        "initial_query": spec.initial_query,
        "absorbed": len(spec.absorbed),
        "clauses": [
            {"id": c.clause_id, "text": c.text, "status": c.status}
            for c in spec.clauses
        ],
    }


def create_app(manager: SessionManager | None = None) -> FastAPI:
    app = FastAPI(title="revstream session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    mgr = manager or SessionManager()
    app.state.manager = mgr

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest) -> dict:
        return mgr.create(request).handle()

    @app.get("/sessions/{session_id}/spec")
    def spec_view(session_id: str) -> dict:
        session = mgr.get(session_id)
        with session.lock:
            return dict(session.spec_view)

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str) -> dict:
        return mgr.get(session_id).handle()

    @app.post("/sessions/{session_id}/inject")
    def inject(session_id: str, body: InjectRequest) -> dict:
        session = mgr.get(session_id)
        if session.status != "running":
            raise HTTPException(status_code=409, detail="session is not running")
        revision = _revision_from_request(session.scenario, body)
        if revision.target_clause is not None:
            with session.lock:
                statuses = {c["id"]: c["status"] for c in session.spec_view.get("clauses", [])}
            status = statuses.get(revision.target_clause)
            if status is None:
                raise HTTPException(
                    status_code=400, detail=f"unknown target clause {revision.target_clause!r}"
                )
            if status != "active":
                raise HTTPException(
                    status_code=400,
                    detail=f"target clause {revision.target_clause!r} is already {status}",
                )
        position = session.queue.put(revision)
        with session.lock:
            session.injected.append(revision)
        return {"accepted": True, "queue_position": position}

    @app.get("/sessions/{session_id}/record")
    def record(session_id: str) -> dict:
        session = mgr.get(session_id)
        with session.lock:
            if session.record is None:
                raise HTTPException(status_code=409, detail="session still running")
            return rec.record_to_dict(session.record)

    @app.get("/sessions/{session_id}/events")
    def stream(session_id: str, from_seq: int = 1) -> StreamingResponse:
        session = mgr.get(session_id)

        def generate():
            sub: queue_mod.Queue = queue_mod.Queue()
            with session.lock:
                snapshot = [f for f in session.frames if f.seq >= from_seq]
                live = session.record is None
                if live:
                    session.subscribers.append(sub)
            last = from_seq - 1
            try:
                for frame in snapshot:
                    last = frame.seq
                    yield _sse(frame.to_dict(), frame.seq)
                if live:
                    while True:
                        frame = sub.get()
                        if frame is None:
                            break
                        if frame.seq <= last:
                            continue
                        last = frame.seq
                        yield _sse(frame.to_dict(), frame.seq)
                with session.lock:
                    record = session.record
                yield _sse({
                    "kind": "end",
                    "termination": record.termination if record else "unknown",
                    "quality": record.quality if record else None,
                    "last_seq": last,
                }, last + 1)
            finally:
                with session.lock:
                    if sub in session.subscribers:
                        session.subscribers.remove(sub)

        return StreamingResponse(generate(), media_type="text/event-stream", headers={
            "Cache-Control": "no-cache",
            "X-Accel-Buffering": "no",
        })

    return app


def _sse(data: dict, event_id: int) -> str:
    return f"id: {event_id}\ndata: {json.dumps(data, sort_keys=True)}\n\n"
