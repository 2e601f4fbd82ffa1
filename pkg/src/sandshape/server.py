"""HTTP control surface for the operator console.

One mutating request per session at a time (steps and terminates grab the
session lock); previews only hold the lock while snapshotting state, so
they can run concurrently. Images travel as lossless base64 of the raw
row-major 8-bit raster with explicit dimensions.
"""

from __future__ import annotations

import base64
import io
import threading
import uuid
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import learner, vision
from .scenarios import BUILTIN, action_from_dict, scenario_from_dict
from .session import CHOICES, Session, SessionTerminated, write_log
from .strategies import Push, Tap


def image_doc(img: np.ndarray) -> dict:
    return {
        "width": int(img.shape[1]),
        "height": int(img.shape[0]),
        "data": base64.b64encode(np.ascontiguousarray(img).tobytes()).decode("ascii"),
    }


class CreateBody(BaseModel):
    scenario: str | dict
    model_path: str | None = None
    auto_strategy: str = "max"
    seed: int | None = None


class StepBody(BaseModel):
    choice: str


class PreviewBody(BaseModel):
    action: dict


class TerminateBody(BaseModel):
    reason: str = "operator"


class _Entry:
    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.Lock()


def create_app(static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="sandshape operator API")
    sessions: dict[str, _Entry] = {}

    def entry(sid: str) -> _Entry:
        if sid not in sessions:
            raise HTTPException(status_code=404, detail="no such session")
        return sessions[sid]

    @app.get("/scenarios")
    def list_scenarios():
        return {"builtin": sorted(BUILTIN)}

    @app.post("/sessions")
    def create_session(body: CreateBody):
        if isinstance(body.scenario, str):
            if body.scenario not in BUILTIN:
                raise HTTPException(status_code=422, detail=f"unknown scenario {body.scenario!r}")
            scenario = BUILTIN[body.scenario]()
        else:
            try:
                scenario = scenario_from_dict(body.scenario)
            except (KeyError, TypeError, ValueError) as err:
                raise HTTPException(status_code=422, detail=f"bad scenario document: {err}")
        if body.seed is not None:
            scenario.master_seed = body.seed
        model = learner.load(body.model_path) if body.model_path else None
        sid = uuid.uuid4().hex[:12]
        sessions[sid] = _Entry(Session(scenario, model=model, auto_strategy=body.auto_strategy))
        return {"id": sid}

    @app.get("/sessions/{sid}/state")
    def state(sid: str):
        s = entry(sid).session
        sc = s.scenario
        contours: dict[str, Any] = {"current": None, "desired": None}
        for key, img in (("current", s.current_img), ("desired", s.desired_img)):
            try:
                pts = vision.detect_contour(img, sc.workspace, sc.n_points, sc.render.sand_cutoff)
                contours[key] = pts.tolist()
            except vision.ContourNotDetected:
                pass
        return {
            "id": sid,
            "k": s.k,
            "e": s.current_error,
            "errors": s.errors,
            "terminated": s.terminated,
            "reason": s.reason,
            "images": {"current": image_doc(s.current_img), "desired": image_doc(s.desired_img)},
            "contours": contours,
            "proposals": s.propose_actions(),
        }

    @app.post("/sessions/{sid}/step")
    def step(sid: str, body: StepBody):
        if body.choice not in CHOICES:
            raise HTTPException(status_code=422, detail=f"choice must be one of {CHOICES}")
        e = entry(sid)
        with e.lock:
            try:
                record = e.session.run_iteration(body.choice)
            except SessionTerminated:
                raise HTTPException(status_code=409, detail="session already terminated")
        return {
            "record": record.to_doc() if record else None,
            "k": e.session.k,
            "e": e.session.current_error,
            "terminated": e.session.terminated,
            "reason": e.session.reason,
        }

    @app.post("/sessions/{sid}/preview")
    def preview(sid: str, body: PreviewBody):
        e = entry(sid)
        try:
            action = action_from_dict(body.action)
        except (KeyError, TypeError, ValueError) as err:
            raise HTTPException(status_code=422, detail=f"bad action: {err}")
        if not isinstance(action, (Push, Tap)):
            raise HTTPException(status_code=422, detail="bad action")
        with e.lock:  # snapshot only; the heavy rollout runs unlocked
            shadow = _snapshot(e.session)
        img, err_val = shadow.preview(action)
        return {"image": image_doc(img), "e": err_val, "k": e.session.k}

    @app.get("/sessions/{sid}/history")
    def history(sid: str):
        s = entry(sid).session
        return {
            "records": [r.to_doc() for r in s.records],
            "errors": s.errors,
            "terminated": s.terminated,
            "reason": s.reason,
        }

    @app.post("/sessions/{sid}/terminate")
    def terminate(sid: str, body: TerminateBody = TerminateBody()):
        e = entry(sid)
        with e.lock:
            if not e.session.terminated:  # engine-side stops keep their reason
                e.session.terminate(body.reason)
        return {"terminated": True, "reason": e.session.reason}

    @app.get("/sessions/{sid}/log", response_class=PlainTextResponse)
    def session_log(sid: str):
        s = entry(sid).session
        buffer = io.StringIO()
        write_log(s.to_log(), buffer)
        return buffer.getvalue()

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def _snapshot(session: Session) -> Session:
    """Cheap fork for previews: shares immutable parts, copies the grid."""
    shadow = object.__new__(Session)
    shadow.__dict__.update(session.__dict__)
    shadow.grid = session.grid.copy()
    return shadow


def serve(host: str = "127.0.0.1", port: int = 8750, static_dir: str | None = None):
    import uvicorn

    uvicorn.run(create_app(static_dir), host=host, port=port, log_level="warning")
