"""HTTP facade over sessions for the labeling UI and scripts."""
from __future__ import annotations

import base64
import io
import secrets
import time
from dataclasses import dataclass
from pathlib import Path
from threading import Lock

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from PIL import Image

from .core import Label
from .errors import ConfigError, DataError, SessionError, TestDriveError
from .ingest import load_detections, load_groundtruth, load_manifest
from .session import Query, Session, SessionConfig


@dataclass
class ApiSessionHandle:
    id: str
    session: Session
    created: float
    lock: Lock


def _png_b64(pixels: np.ndarray) -> str:
    arr = np.clip(pixels * 255.0 + 0.5, 0, 255).astype(np.uint8)
    im = Image.fromarray(arr, mode="L")
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _query_payload(session: Session, q: Query) -> dict:
    gs = session._gamma_states[q.gamma]
    return {
        "id": q.id,
        "kind": q.kind,
        "gamma": q.gamma,
        "pool_size": len(q.payload) if q.kind == "recall-pool" else 1,
        "progress": {
            "precision_answered": sum(1 for p in gs.precision_queries if p.id in gs.answers),
            "precision_total": gs.k_target,
            "pools_answered": gs.run.state.T,
            "positives": gs.run.state.positives,
            "target_positives": session.config.target_positives,
        },
        "image_png_b64": _png_b64(session.render_query(q)),
    }


def create_app(root: str | Path = ".") -> FastAPI:
    """Build the service. `root` anchors relative dataset paths."""
    root = Path(root)
    app = FastAPI(title="testdrive")
    registry: dict[str, ApiSessionHandle] = {}

    from fastapi.exceptions import RequestValidationError

    @app.exception_handler(RequestValidationError)
    async def _malformed(request, exc):
        return JSONResponse({"error": "malformed body"}, status_code=400)

    def _handle(session_id: str) -> ApiSessionHandle | None:
        return registry.get(session_id)

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [{"id": h.id, "created": h.created,
                              "complete": h.session.complete} for h in registry.values()]}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        if not isinstance(body, dict):
            return JSONResponse({"error": "body must be an object"}, status_code=400)
        manifest_path = body.get("manifest")
        detections_path = body.get("detections")
        if not manifest_path or not detections_path:
            return JSONResponse({"error": "manifest and detections paths are required"},
                                status_code=400)
        try:
            config = SessionConfig(**body.get("config", {}))
        except (TypeError, ConfigError) as e:
            return JSONResponse({"error": f"invalid config: {e}"}, status_code=400)
        if config.oracle != "human":
            return JSONResponse({"error": "API sessions are human-labeled; use the CLI "
                                          "for simulated runs"}, status_code=400)
        try:
            manifest = load_manifest(root / manifest_path)
            detections = load_detections(root / detections_path, manifest)
            groundtruth = None
            if body.get("groundtruth"):
                groundtruth = load_groundtruth(root / body["groundtruth"], manifest)
            out_dir = root / body["out_dir"] if body.get("out_dir") else None
            sources = {"manifest": manifest_path, "detections": detections_path}
            if body.get("groundtruth"):
                sources["groundtruth"] = body["groundtruth"]
            session = Session(manifest, detections, config, groundtruth,
                              out_dir=out_dir, sources=sources)
        except (DataError, OSError) as e:
            return JSONResponse({"error": str(e)}, status_code=422)
        sid = secrets.token_hex(8)
        registry[sid] = ApiSessionHandle(sid, session, time.time(), Lock())
        return {"id": sid, "gammas": list(session.sweep.gammas)}

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str, gamma: float | None = None):
        h = _handle(session_id)
        if h is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        with h.lock:
            try:
                q = h.session.next_query(gamma)
            except SessionError as e:
                return JSONResponse({"error": str(e)}, status_code=404)
            if q is None:
                return Response(status_code=204)
            return _query_payload(h.session, q)

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: dict):
        h = _handle(session_id)
        if h is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        qid = body.get("query_id")
        label = body.get("label")
        if label not in (0, 1):
            return JSONResponse({"error": "label must be 0 or 1"}, status_code=400)
        if not isinstance(qid, str):
            return JSONResponse({"error": "query_id must be a string"}, status_code=400)
        with h.lock:
            try:
                rec = h.session.submit_answer(qid, Label(int(label), "human"))
            except SessionError as e:
                msg = str(e)
                code = 409 if "already answered" in msg else 404
                return JSONResponse({"error": msg}, status_code=code)
            return rec.as_dict()

    @app.get("/sessions/{session_id}/estimates")
    def estimates(session_id: str):
        h = _handle(session_id)
        if h is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        with h.lock:
            recs = h.session.estimates()
            per_gamma = []
            for g in h.session.sweep.gammas:
                gs = h.session._gamma_states[g]
                per_gamma.append({
                    "gamma": g,
                    "complete": gs.complete,
                    "precision_answered": sum(1 for p in gs.precision_queries
                                              if p.id in gs.answers),
                    "precision_total": gs.k_target,
                    "pools_answered": gs.run.state.T,
                })
            return {"records": [_sanitize(r.as_dict()) for r in recs],
                    "progress": per_gamma,
                    "complete": h.session.complete}

    return app


def _sanitize(d: dict) -> dict:
    # JSON has no NaN; expose it as null.
    return {k: (None if isinstance(v, float) and v != v else v) for k, v in d.items()}
