"""Local HTTP session service bridging the pipeline to the browser UI."""

from __future__ import annotations

import threading

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from ..geometry.meshio import mesh_to_stl_bytes
from ..metrics.report import MetricsReport
from ..pipeline.cache import Repository
from ..pipeline.config import ConfigError, PipelineConfig
from ..pipeline.run import STAGES
from .sessions import ARTIFACT_STAGES, Session


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    payload = {"code": code, "message": message}
    if field is not None:
        payload["field"] = field
    return JSONResponse(payload, status_code=status)


def create_app(repository) -> FastAPI:
    repo = repository if isinstance(repository, Repository) else Repository.open(repository)
    app = FastAPI(title="craniobench service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session | None:
        return sessions.get(session_id)

    @app.get("/cases")
    def list_cases():
        return [{"id": cid, "has_ground_truth": rec.has_ground_truth}
                for cid, rec in sorted(repo.cases.items())]

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        case_id = body.get("case_id") if isinstance(body, dict) else None
        if not case_id or case_id not in repo.cases:
            return _error(404, "unknown_case", f"case '{case_id}' is not in the repository")
        session = Session(case=repo.cases[case_id], repository=repo,
                          config=PipelineConfig())
        with registry_lock:
            sessions[session.session_id] = session
        return session.as_dict()

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session '{session_id}'")
        with session.lock:
            return session.as_dict()

    @app.patch("/sessions/{session_id}/config")
    async def patch_config(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session '{session_id}'")
        patch = await request.json()
        if not isinstance(patch, dict):
            return _error(400, "invalid_param", "config patch must be an object")
        with session.lock:
            if session.running_stage is not None:
                return _error(409, "busy",
                              f"stage '{session.running_stage}' is running")
            current = session.config.to_dict()
            merged = {**current, **patch}
            try:
                new_config = PipelineConfig.from_dict(merged)
            except ConfigError as exc:
                return _error(400, "invalid_param", str(exc), field=exc.field)
            resolved = new_config.to_dict()
            changed = {key for key in patch if resolved.get(key) != current.get(key)}
            session.apply_patch(new_config, changed)
            return session.as_dict()

    @app.post("/sessions/{session_id}/stages/{stage}", status_code=202)
    def execute_stage(session_id: str, stage: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session '{session_id}'")
        if stage not in STAGES:
            return _error(404, "unknown_stage", f"no stage '{stage}'")
        with session.lock:
            if session.running_stage is not None:
                return _error(409, "busy",
                              f"stage '{session.running_stage}' is running")
            if not session.stage_order_ok(stage):
                return _error(409, "stage_order",
                              f"upstream stages of '{stage}' are not done")
            if session.stages[stage].status != "pending":
                return _error(409, "not_pending",
                              f"stage '{stage}' is {session.stages[stage].status}")
            session.running_stage = stage
            session.stages[stage].status = "running"
            session.stages[stage].progress = 0.0
        thread = threading.Thread(target=_run_stage, args=(session, stage),
                                  daemon=True)
        thread.start()
        return {"status": "accepted", "stage": stage}

    @app.get("/sessions/{session_id}/artifacts/{name}")
    def fetch_artifact(session_id: str, name: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session '{session_id}'")
        if name == "target":
            return Response(content=mesh_to_stl_bytes(session.run.target_mesh),
                            media_type="model/stl")
        if name not in ARTIFACT_STAGES:
            return _error(404, "unknown_artifact", f"no artifact '{name}'")
        with session.lock:
            entry = session.artifacts.get(name)
        if entry is None:
            return _error(409, "not_ready",
                          f"artifact '{name}' requires stage "
                          f"'{ARTIFACT_STAGES[name]}' to be done")
        data, media_type = entry
        return Response(content=data, media_type=media_type)

    return app


def _run_stage(session: Session, stage: str) -> None:
    def progress(_stage: str, fraction: float) -> None:
        session.stages[stage].progress = float(fraction)

    try:
        if stage == "selection":
            session.run.run_selection(progress)
        elif stage == "alignment":
            session.run.run_alignment(progress)
        elif stage == "fusion":
            session.run.run_fusion(progress)
            _store_fusion_artifacts(session)
        elif stage == "postprocess":
            session.run.run_postprocess(progress)
            _store_postprocess_artifacts(session)
        elif stage == "metrics":
            session.run.run_metrics(progress)
            _store_metrics_artifacts(session)
        with session.lock:
            session.stages[stage].status = "done"
            session.stages[stage].progress = 1.0
    except Exception as exc:
        with session.lock:
            session.stages[stage].status = "failed"
            session.stages[stage].reason = str(exc)
    finally:
        with session.lock:
            session.running_stage = None


def _store_fusion_artifacts(session: Session) -> None:
    rows = ["value,count"]
    rows += [f"{value:.10g},{count}" for value, count in session.run.ratio_histogram()]
    with session.lock:
        session.artifacts["ratio_histogram"] = ("\n".join(rows).encode() + b"\n",
                                                "text/csv")


def _store_postprocess_artifacts(session: Session) -> None:
    data = mesh_to_stl_bytes(session.run.implant)
    with session.lock:
        session.artifacts["implant"] = (data, "model/stl")


def _store_metrics_artifacts(session: Session) -> None:
    rep = session.run.report
    csv = MetricsReport.csv_header() + "\n" + rep.csv_row() + "\n"
    distances = np.asarray(session.run.distances, dtype="<f4").tobytes()
    with session.lock:
        session.artifacts["report"] = (csv.encode(), "text/csv")
        session.artifacts["implant_distances"] = (distances,
                                                  "application/octet-stream")
