"""HTTP front door: chat, plan inspection, session logs, health.

One process owns one planning instance, one model/plan state, and one
router backend.  Mutating snippet executions are serialized behind a
single writer lock and rolled back (scenario constraints and last solve
outcome) when they fail, so a broken generated snippet never corrupts
state for the next query.  Everything else runs concurrently.

Sessions are in-memory, append-only interaction logs; pass
``session_dir`` to additionally append each entry to a per-session
JSONL file.
"""

from __future__ import annotations

import datetime as dt
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .dsl import (
    OK,
    DEFAULT_STEP_BUDGET,
    DslParseError,
    ExecutionResult,
    is_mutating,
    parse_script,
    run_source,
)
from .io import load_instance, plan_to_dict
from .model import PlanningInstance
from .router import (
    Answer,
    DEFAULT_RESPONSE,
    FixtureBackend,
    HostContext,
    RouterError,
    TokenUsage,
    handle_query,
)
from .solver import SolveOutcome
from .templates import data_path

IN_DOMAIN = "in_domain"
OUT_OF_DOMAIN = "out_of_domain"


@dataclass(frozen=True)
class InteractionLogEntry:
    query: str
    route: str
    snippet: Optional[str]
    logs: tuple
    usage: TokenUsage
    latency_ms: int
    plan_version_before: int
    plan_version_after: int

    def to_dict(self) -> dict:
        data = {
            "query": self.query,
            "route": self.route,
            "logs": list(self.logs),
            "usage": {
                "input_tokens": self.usage.input_tokens,
                "output_tokens": self.usage.output_tokens,
            },
            "latency_ms": self.latency_ms,
            "plan_version_before": self.plan_version_before,
            "plan_version_after": self.plan_version_after,
        }
        if self.snippet is not None:
            data["snippet"] = self.snippet
        return data


@dataclass
class Session:
    session_id: str
    created_at: str
    entries: list = field(default_factory=list)


def _utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def answer_to_dict(answer: Answer) -> dict:
    return {
        "kind": answer.kind,
        "logs": list(answer.logs),
        "snippet": answer.snippet,
        "usage": {
            "input_tokens": answer.usage.input_tokens,
            "output_tokens": answer.usage.output_tokens,
        },
    }


def outcome_to_dict(
    outcome: SolveOutcome, instance: Optional[PlanningInstance] = None
) -> dict:
    data = {
        "feasible": outcome.feasible,
        "objective": None if outcome.objective is None else str(outcome.objective),
        "nodes_explored": outcome.nodes_explored,
        "assignment": None,
    }
    if outcome.assignment is not None:
        lines = []
        for line in outcome.assignment:
            entry = {
                "demand_id": line.demand_id,
                "supplier_id": line.supplier_id,
                "method": line.method,
                "ship_week": line.ship_week,
                "dock_week": line.dock_week,
                "line_cost": str(line.line_cost),
            }
            if instance is not None:
                entry["ideal_dock_week"] = instance.demand(
                    line.demand_id
                ).ideal_dock_week
            lines.append(entry)
        data["assignment"] = lines
    return data


class ServiceState:
    """Everything one running service instance owns."""

    def __init__(
        self,
        instance: PlanningInstance,
        backend,
        session_dir=None,
        step_budget: int = DEFAULT_STEP_BUDGET,
    ):
        self.instance = instance
        self.backend = backend
        self.hosts = HostContext.for_instance(instance, step_budget=step_budget)
        self.write_lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self.sessions_lock = threading.Lock()
        self.session_dir = Path(session_dir) if session_dir else None
        if self.session_dir:
            self.session_dir.mkdir(parents=True, exist_ok=True)

    def plan_version(self) -> int:
        current = self.hosts.plan_store.current
        return 0 if current is None else current.version

    def make_runner(self, capture: dict):
        """Snippet runner that serializes mutating executions.

        ``capture`` receives the plan versions observed around this
        execution, attributed under the lock so concurrent commits are
        never double-counted across log entries.
        """

        def runner(snippet: str) -> ExecutionResult:
            try:
                mutating = is_mutating(parse_script(snippet))
            except DslParseError:
                mutating = False  # a snippet that cannot parse cannot mutate
            if not mutating:
                capture["before"] = capture["after"] = self.plan_version()
                return run_source(snippet, self.hosts.fresh_env())
            with self.write_lock:
                capture["before"] = self.plan_version()
                model = self.hosts.model
                saved_scenario = list(model.scenario_constraints)
                saved_outcome = model.last_outcome
                result = run_source(snippet, self.hosts.fresh_env())
                if result.status != OK:
                    model.scenario_constraints = saved_scenario
                    model.last_outcome = saved_outcome
                capture["after"] = self.plan_version()
                return result

        return runner

    def get_or_create_session(self, session_id: Optional[str]) -> Session:
        with self.sessions_lock:
            if session_id is None:
                session_id = uuid.uuid4().hex
            session = self.sessions.get(session_id)
            if session is None:
                session = Session(session_id=session_id, created_at=_utc_now())
                self.sessions[session_id] = session
            return session

    def append_entry(self, session: Session, entry: InteractionLogEntry) -> None:
        with self.sessions_lock:
            session.entries.append(entry)
            if self.session_dir:
                line = json.dumps(entry.to_dict(), sort_keys=True, ensure_ascii=False)
                path = self.session_dir / f"{session.session_id}.jsonl"
                with path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")


def default_instance() -> PlanningInstance:
    """The packaged example instance the service boots with by default."""
    return load_instance(str(data_path("sample_instance")))


def create_app(
    instance: Optional[PlanningInstance] = None,
    backend=None,
    *,
    session_dir=None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> FastAPI:
    if instance is None:
        instance = default_instance()
    if backend is None:
        backend = FixtureBackend()
    state = ServiceState(
        instance, backend, session_dir=session_dir, step_budget=step_budget
    )

    app = FastAPI(title="fulfil", docs_url=None, redoc_url=None)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    def _malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request body"})

    # Endpoints are plain ``def`` so the framework runs each request on a
    # worker thread; the writer lock, not the event loop, is what
    # serializes mutations.

    @app.post("/chat")
    def chat(payload: dict = Body(...)):
        query = payload.get("query")
        if not isinstance(query, str) or not query.strip():
            raise HTTPException(status_code=400, detail="query must be a nonempty string")
        session_id = payload.get("session_id")
        if session_id is not None and (
            not isinstance(session_id, str) or not session_id
        ):
            raise HTTPException(status_code=400, detail="session_id must be a nonempty string")
        session = state.get_or_create_session(session_id)

        version = state.plan_version()
        capture = {"before": version, "after": version}
        started = time.perf_counter()
        try:
            answer = handle_query(
                query, state.backend, state.hosts, runner=state.make_runner(capture)
            )
        except RouterError as exc:
            raise HTTPException(status_code=503, detail=f"backend unreachable: {exc}")
        latency_ms = int(round((time.perf_counter() - started) * 1000))

        entry = InteractionLogEntry(
            query=query,
            route=OUT_OF_DOMAIN if answer.kind == DEFAULT_RESPONSE else IN_DOMAIN,
            snippet=answer.snippet,
            logs=answer.logs,
            usage=answer.usage,
            latency_ms=latency_ms,
            plan_version_before=capture["before"],
            plan_version_after=capture["after"],
        )
        state.append_entry(session, entry)
        return {
            "session_id": session.session_id,
            "answer": answer_to_dict(answer),
            "entry": entry.to_dict(),
        }

    @app.get("/plan")
    def get_plan():
        current = state.hosts.plan_store.current
        if current is None:
            raise HTTPException(status_code=404, detail="no plan committed yet")
        return plan_to_dict(current, state.instance)

    @app.post("/plan/optimize")
    def optimize_plan():
        if not state.write_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a mutating request is in flight")
        try:
            outcome = state.hosts.model.optimize()
        finally:
            state.write_lock.release()
        return outcome_to_dict(outcome, state.instance)

    @app.get("/sessions/{session_id}/log")
    def session_log(session_id: str):
        with state.sessions_lock:
            session = state.sessions.get(session_id)
            if session is None:
                raise HTTPException(status_code=404, detail="unknown session")
            return [entry.to_dict() for entry in session.entries]

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "instance": state.instance.name,
            "backend": getattr(state.backend, "kind", "unknown"),
        }

    return app
