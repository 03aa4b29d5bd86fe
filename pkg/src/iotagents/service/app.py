"""HTTP surface over the orchestrator: datasets, sessions, rounds, jobs."""

from __future__ import annotations

import io
import os
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .. import __version__
from ..datasets import (
    SchemaError,
    SynthSensorsSpec,
    SynthSeriesSpec,
    TimeSeriesDataset,
    load_citypulse_csv,
    load_sensors_csv,
    load_series_csv,
    load_streets_csv,
    synth_sensors,
    synth_series,
)
from ..orchestrator import (
    ExecutionError,
    MissingBindingError,
    Orchestrator,
    PlanValidationError,
    TaskPlan,
)
from ..store import FileStore, NotFoundError
from .jobs import JobRunner

ENV_PORT = "IOTAGENTS_PORT"
ENV_STORE = "IOTAGENTS_STORE"
ENV_SEED = "IOTAGENTS_SEED"


@dataclass
class ServiceConfig:
    store_root: str = "./iotagents-store"
    llm_endpoint: str | None = None
    default_seed: int = 0
    workers: int = 4

    @classmethod
    def from_env(cls) -> "ServiceConfig":
        return cls(
            store_root=os.environ.get(ENV_STORE, "./iotagents-store"),
            default_seed=int(os.environ.get(ENV_SEED, "0")),
        )


class RoundRequest(BaseModel):
    text: str


class SessionRequest(BaseModel):
    bindings: dict[str, str] = {}


class SynthRequest(BaseModel):
    kind: str
    spec: dict = {}


class JobRequest(BaseModel):
    session_id: str
    parameters: dict = {}
    visualization: str = ""


@dataclass
class _SessionLocks:
    locks: dict = field(default_factory=dict)
    guard: threading.Lock = field(default_factory=threading.Lock)

    def for_session(self, session_id: str) -> threading.Lock:
        with self.guard:
            return self.locks.setdefault(session_id, threading.Lock())


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    store = FileStore(config.store_root)
    orchestrator = Orchestrator(
        store, llm_endpoint=config.llm_endpoint, default_seed=config.default_seed
    )
    jobs = JobRunner(workers=config.workers)
    session_locks = _SessionLocks()

    app = FastAPI(title="iotagents", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.orchestrator = orchestrator
    app.state.store = store
    app.state.jobs = jobs

    @app.on_event("shutdown")
    def drain_jobs():
        jobs.shutdown()  # graceful: waits for in-flight work

    def _session_or_404(session_id: str):
        session = orchestrator.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"unknown session {session_id!r}")
        return session

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/datasets")
    async def upload_dataset(
        request: Request,
        kind: str = Query(...),
        dataset_id: str = Query("uploaded"),
        target: str | None = Query(None),
    ):
        raw = (await request.body()).decode("utf-8")
        if not raw.strip():
            raise HTTPException(400, detail="empty CSV body")
        try:
            if kind == "series":
                value = load_series_csv(io.StringIO(raw), dataset_id=dataset_id,
                                        target=target)
                extra = {"n_steps": value.n_steps}
            elif kind == "sensors":
                value = load_sensors_csv(io.StringIO(raw))
                extra = {"count": len(value)}
            elif kind == "streets":
                table = load_streets_csv(io.StringIO(raw))
                value = {k: frozenset(v) for k, v in table.items()}
                extra = {"count": len(value)}
            elif kind == "citypulse":
                dataset, nodes = load_citypulse_csv(io.StringIO(raw),
                                                    dataset_id=dataset_id,
                                                    target=target)
                series_id = store.store(dataset)
                sensors_id = store.store(list(nodes))
                return {
                    "kind": kind,
                    "series_record": series_id,
                    "sensors_record": sensors_id,
                }
            else:
                raise HTTPException(400, detail=f"unknown dataset kind {kind!r}")
        except SchemaError as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        record_id = store.store(value if kind != "sensors" else list(value))
        return {"kind": kind, "record_id": record_id, **extra}

    @app.post("/datasets/synth")
    def synth_dataset(body: SynthRequest):
        try:
            if body.kind == "series":
                spec = SynthSeriesSpec(**body.spec)
                record_id = store.store(synth_series(spec))
                return {"kind": "series", "record_id": record_id}
            if body.kind == "sensors":
                spec = SynthSensorsSpec(**body.spec)
                nodes, truth = synth_sensors(spec)
                streets = {n.id: n.streets for n in nodes}
                return {
                    "kind": "sensors",
                    "record_id": store.store(list(nodes)),
                    "streets_record": store.store(streets),
                    "truth_record": store.store({"labels": truth}),
                }
        except TypeError as exc:
            raise HTTPException(422, detail=f"bad spec: {exc}") from exc
        raise HTTPException(400, detail=f"unknown synth kind {body.kind!r}")

    @app.get("/datasets/{record_id}")
    def dataset_info(record_id: str):
        try:
            value = store.load(record_id)
        except NotFoundError as exc:
            raise HTTPException(404, detail=str(exc)) from exc
        if isinstance(value, TimeSeriesDataset):
            return {
                "record_id": record_id,
                "type": "series",
                "id": value.id,
                "n_steps": value.n_steps,
                "features": value.feature_names,
                "target": value.target,
            }
        if isinstance(value, list):
            return {"record_id": record_id, "type": "sensors", "count": len(value)}
        return {"record_id": record_id, "type": type(value).__name__}

    @app.post("/sessions")
    def create_session(body: SessionRequest):
        session = orchestrator.create_session()
        try:
            for role, record_id in body.bindings.items():
                orchestrator.bind_dataset(session, role, record_id)
        except (ExecutionError, MissingBindingError) as exc:
            del orchestrator.sessions[session.id]
            raise HTTPException(404, detail=str(exc)) from exc
        return {"session_id": session.id, "bindings": session.bindings}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        session = _session_or_404(session_id)
        return {
            "session_id": session.id,
            "bindings": session.bindings,
            "rounds": [
                {
                    "text": r.text,
                    "plan": r.plan.as_dict() if r.plan else None,
                    "payloads": [p.as_dict() for p in r.payloads],
                    "clarification": r.result_summary.get("clarification"),
                }
                for r in session.rounds
            ],
        }

    @app.post("/sessions/{session_id}/rounds")
    def post_round(session_id: str, body: RoundRequest):
        session = _session_or_404(session_id)
        lock = session_locks.for_session(session_id)
        with lock:  # rounds within one session run strictly sequentially
            try:
                round_ = orchestrator.run_round(session, body.text)
            except (MissingBindingError, ExecutionError, PlanValidationError) as exc:
                raise HTTPException(422, detail=str(exc)) from exc
        return {
            "round_index": len(session.rounds) - 1,
            "plan": round_.plan.as_dict() if round_.plan else None,
            "payloads": [p.as_dict() for p in round_.payloads],
            "clarification": round_.result_summary.get("clarification"),
        }

    @app.post("/jobs/{intent}")
    def post_job(intent: str, body: JobRequest):
        session = _session_or_404(body.session_id)
        try:
            plan = TaskPlan(
                intent=intent,
                parameters=dict(body.parameters),
                visualization=body.visualization,
            )
        except PlanValidationError as exc:
            raise HTTPException(422, detail=str(exc)) from exc

        def work():
            result = orchestrator.execute_plan(plan, session)
            payload = orchestrator.render_results(result, plan)
            return {
                "plan": plan.as_dict(),
                "payload": payload.as_dict(),
                "agent": result.agent,
            }

        job = jobs.submit(intent, work, session_id=session.id)
        return {"job_id": job.id, "status": job.status}

    @app.get("/jobs/{job_id}")
    def job_info(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, detail=f"unknown job {job_id!r}")
        body = {"job_id": job.id, "intent": job.intent, "status": job.status}
        if job.status == "done":
            body["result"] = job.result
        if job.status == "error":
            body["error"] = job.error
        return body

    return app
