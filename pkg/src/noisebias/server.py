"""HTTP+JSON service in front of labeling sessions.

Routes (exact paths):

    POST /api/sessions                     create from a config JSON body
    GET  /api/sessions/{id}/next?worker=W  the worker's outstanding stimulus
    POST /api/sessions/{id}/labels         submit {worker, stimulus_id, response}
    GET  /api/sessions/{id}/template       live template or 409 not-ready
    GET  /api/sessions/{id}/export         trial log as a JSONL stream

Stimulus payloads carry only {stimulus_id, images, index, total}; whether
a trial is a catch trial is never visible on the wire.  All state lives
in the session layer (append-only logs under ``data_dir``), so killing
and restarting the service loses nothing.

An optional static directory (the browser frontend build) is mounted at
the web root; the API works identically without it.
"""

from __future__ import annotations

import base64
import os
import time
import threading
from typing import Optional

from fastapi import Body, FastAPI, Query
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .errors import EstimationError, InputError
from .session import (DuplicateSessionError, LabelingSession, SessionConfig,
                      SessionNotFoundError, UnknownStimulusError,
                      list_sessions)


def _error_json(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _now_ms() -> int:
    return int(time.time() * 1000)


class SessionRegistry:
    """Loads persisted sessions lazily and keeps live ones unique."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self._sessions: dict[str, LabelingSession] = {}
        self._lock = threading.Lock()

    def create(self, config: SessionConfig) -> LabelingSession:
        with self._lock:
            if config.session_id in self._sessions:
                raise DuplicateSessionError(
                    f"session {config.session_id!r} already exists")
            session = LabelingSession.create(config, self.data_dir)
            self._sessions[config.session_id] = session
            return session

    def get(self, session_id: str) -> LabelingSession:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                session = LabelingSession.load(self.data_dir, session_id)
                self._sessions[session_id] = session
            return session

    def close_all(self):
        with self._lock:
            for session in self._sessions.values():
                session.close()
            self._sessions.clear()


def _b64_png(image) -> str:
    return base64.b64encode(image.to_png_bytes()).decode("ascii")


def create_app(data_dir: str, static_dir: Optional[str] = None) -> FastAPI:
    os.makedirs(data_dir, exist_ok=True)
    app = FastAPI(title="noisebias labeling service")
    registry = SessionRegistry(data_dir)
    app.state.registry = registry

    @app.post("/api/sessions")
    def create_session(config: dict = Body(...)):
        try:
            session = registry.create(SessionConfig.from_dict(config))
        except DuplicateSessionError as e:
            return _error_json(409, str(e))
        except InputError as e:
            return _error_json(400, str(e))
        return JSONResponse(status_code=201,
                            content={"session_id": session.config.session_id})

    @app.get("/api/sessions/{session_id}/config")
    def get_config(session_id: str):
        try:
            session = registry.get(session_id)
        except SessionNotFoundError as e:
            return _error_json(404, str(e))
        return session.config.to_dict()

    @app.get("/api/sessions/{session_id}/next")
    def next_stimulus(session_id: str, worker: str = Query(...)):
        try:
            session = registry.get(session_id)
        except SessionNotFoundError as e:
            return _error_json(404, str(e))
        try:
            stim = session.next_stimulus(worker)
        except InputError as e:
            return _error_json(400, str(e))
        if stim is None:
            return {"status": "complete",
                    "total": session.config.n_target_trials,
                    "category": session.config.category_name}
        return {
            "stimulus_id": stim.stimulus_id,
            "images": [_b64_png(img) for img in stim.images],
            "index": stim.index,
            "total": stim.total,
            "category": session.config.category_name,
        }

    @app.post("/api/sessions/{session_id}/labels")
    def submit_label(session_id: str, payload: dict = Body(...)):
        try:
            session = registry.get(session_id)
        except SessionNotFoundError as e:
            return _error_json(404, str(e))
        worker = payload.get("worker")
        stimulus_id = payload.get("stimulus_id")
        response = payload.get("response")
        if not isinstance(worker, str) or not isinstance(stimulus_id, str) \
                or not isinstance(response, str):
            return _error_json(
                400, "label body needs string fields worker, stimulus_id, response")
        try:
            ack = session.submit_label(worker, stimulus_id, response,
                                       timestamp=_now_ms())
        except UnknownStimulusError as e:
            return _error_json(409, str(e))
        except InputError as e:
            return _error_json(400, str(e))
        return ack

    @app.get("/api/sessions/{session_id}/template")
    def current_template(session_id: str):
        try:
            session = registry.get(session_id)
        except SessionNotFoundError as e:
            return _error_json(404, str(e))
        try:
            template, glyph = session.current_template()
        except EstimationError as e:
            return JSONResponse(status_code=409,
                                content={"status": "not_ready",
                                         "reason": str(e)})
        return {
            "values": [float(v) for v in template.values],
            "trials_used": template.trials_used,
            "glyph": _b64_png(glyph),
        }

    @app.get("/api/sessions/{session_id}/export")
    def export_trials(session_id: str):
        try:
            session = registry.get(session_id)
        except SessionNotFoundError as e:
            return _error_json(404, str(e))
        return StreamingResponse(session.iter_export_lines(),
                                 media_type="application/x-ndjson")

    @app.get("/api/sessions")
    def sessions_index():
        return {"sessions": list_sessions(data_dir)}

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="frontend")

    return app


def run_server(addr: str, data_dir: str, static_dir: Optional[str] = None):
    """Blocking uvicorn run; ``addr`` is host:port."""
    import uvicorn

    host, sep, port_text = addr.rpartition(":")
    if not sep or not port_text.isdigit():
        raise InputError(f"addr must look like host:port, got {addr!r}")
    app = create_app(data_dir, static_dir=static_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port_text))
