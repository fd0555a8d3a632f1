"""HTTP service exposing floorplan generation sessions under /v1.

Sessions are persisted to a JSON file so a restarted server keeps its state;
every mutation appends to the session's history. The model checkpoint is
optional: without one the service starts degraded and generation returns 409.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from typing import Any

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .connectivity import BubbleDiagram, parse_bubble_diagram
from .core import (
    Box,
    DEFAULT_VOCAB,
    PlanforgeError,
    floorplan_from_dict,
    floorplan_to_dict,
)
from .evaluation import compatibility, render_svg
from .inference import GenerationPipeline, GenerationRequest
from .training import load_checkpoint


class SessionStore:
    """Thread-safe JSON-file-backed session map with append-only history."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.lock = threading.Lock()
        self.sessions: dict[str, dict] = {}
        self.candidates: dict[str, dict] = {}
        if path and os.path.exists(path):
            with open(path) as fh:
                blob = json.load(fh)
            self.sessions = blob.get("sessions", {})
            self.candidates = blob.get("candidates", {})

    def _flush(self) -> None:
        if not self.path:
            return
        tmp = f"{self.path}.tmp"
        with open(tmp, "w") as fh:
            json.dump({"sessions": self.sessions, "candidates": self.candidates}, fh)
        os.replace(tmp, self.path)

    def create(self, diagram: dict) -> dict:
        with self.lock:
            session_id = uuid.uuid4().hex[:12]
            doc = {
                "session_id": session_id,
                "created_at": time.time(),
                "diagram": diagram,
                "candidates": [],
                "history": [{"event": "created", "at": time.time()}],
            }
            self.sessions[session_id] = doc
            self._flush()
            return doc

    def get(self, session_id: str) -> dict:
        doc = self.sessions.get(session_id)
        if doc is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return doc

    def record(self, session_id: str, event: dict, candidates: list[dict]) -> None:
        with self.lock:
            doc = self.get(session_id)
            doc["history"].append({**event, "at": time.time()})
            for c in candidates:
                self.candidates[c["candidate_id"]] = c
                doc["candidates"].append(c["candidate_id"])
            self._flush()

    def candidate(self, candidate_id: str) -> dict:
        doc = self.candidates.get(candidate_id)
        if doc is None:
            raise HTTPException(404, f"unknown candidate {candidate_id!r}")
        return doc


class SessionIn(BaseModel):
    diagram: dict


class GenerateIn(BaseModel):
    num_candidates: int = 1
    seed: int = 0
    top_k: int = 5
    refine_iters: int = 5
    locks: dict[str, list[int]] = Field(default_factory=dict)


class RefineIn(BaseModel):
    candidate_id: str
    edits: dict[str, list[int]] = Field(default_factory=dict)
    iters: int = 5


def _to_box(values: list[int], label: str) -> Box:
    if len(values) != 4:
        raise HTTPException(422, f"{label}: box needs 4 coordinates")
    try:
        return Box(*(int(v) for v in values))
    except PlanforgeError as exc:
        raise HTTPException(422, f"{label}: {exc}") from exc


def create_app(model_path: str | None = None, store_path: str | None = None) -> FastAPI:
    app = FastAPI(
        title="planforge",
        version="1.0",
        openapi_url="/v1/spec",
        docs_url=None,
        redoc_url=None,
    )
    store = SessionStore(store_path)
    pipeline: GenerationPipeline | None = None
    load_error: str | None = None
    if model_path:
        try:
            draft, refiner, stats, vocab, model_hash = load_checkpoint(model_path)
            pipeline = GenerationPipeline(draft, refiner, stats, vocab, model_hash)
        except (OSError, PlanforgeError, RuntimeError, KeyError) as exc:
            load_error = str(exc)

    def require_pipeline() -> GenerationPipeline:
        if pipeline is None:
            raise HTTPException(409, "no model loaded; generation unavailable")
        return pipeline

    @app.get("/v1/health")
    def health() -> dict:
        doc: dict[str, Any] = {"status": "ok" if pipeline else "degraded"}
        if pipeline:
            doc["model_hash"] = pipeline.model_hash
        if load_error:
            doc["detail"] = load_error
        return doc

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: SessionIn) -> dict:
        try:
            BubbleDiagram.from_dict(body.diagram, DEFAULT_VOCAB)
        except PlanforgeError as exc:
            raise HTTPException(422, f"invalid bubble diagram: {exc}") from exc
        doc = store.create(body.diagram)
        return {"session_id": doc["session_id"], "created_at": doc["created_at"]}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return store.get(session_id)

    @app.post("/v1/sessions/{session_id}/generate")
    def generate(session_id: str, body: GenerateIn) -> dict:
        session = store.get(session_id)
        pipe = require_pipeline()
        diagram = BubbleDiagram.from_dict(session["diagram"], pipe.vocab)
        locks = {k: _to_box(v, f"lock {k!r}") for k, v in body.locks.items()}
        try:
            req = GenerationRequest(
                diagram,
                num_candidates=body.num_candidates,
                seed=body.seed,
                top_k=body.top_k,
                refine_iters=body.refine_iters,
                locks=locks,
            )
            result = pipe.generate(req)
        except PlanforgeError as exc:
            raise HTTPException(422, str(exc)) from exc
        out = []
        for i, cand in enumerate(result.candidates):
            out.append(
                {
                    "candidate_id": f"{session_id}-{uuid.uuid4().hex[:8]}",
                    "session_id": session_id,
                    "seed": body.seed + i,
                    **cand.to_dict(),
                }
            )
        store.record(
            session_id,
            {"event": "generate", "seed": body.seed, "num_candidates": body.num_candidates},
            out,
        )
        ordered, _ = parse_bubble_diagram(diagram, pipe.stats)
        return {
            "session_id": session_id,
            "model_hash": result.model_hash,
            "request_seed": result.request_seed,
            "node_order": [node.node_id for node in ordered],
            "candidates": out,
        }

    @app.post("/v1/sessions/{session_id}/refine")
    def refine(session_id: str, body: RefineIn) -> dict:
        session = store.get(session_id)
        pipe = require_pipeline()
        source = store.candidate(body.candidate_id)
        if source["session_id"] != session_id:
            raise HTTPException(404, "candidate does not belong to this session")
        if body.iters < 0:
            raise HTTPException(422, "iters must be >= 0")
        diagram = BubbleDiagram.from_dict(session["diagram"], pipe.vocab)
        fp = floorplan_from_dict(source["floorplan"], pipe.vocab)
        try:
            edits = {
                int(k): _to_box(v, f"edit {k!r}") for k, v in body.edits.items()
            }
            refined, trace = pipe.edit_and_refine(fp, edits, diagram, iters=body.iters)
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from exc
        except PlanforgeError as exc:
            raise HTTPException(422, str(exc)) from exc
        ordered, _ = parse_bubble_diagram(diagram, pipe.stats)
        out = {
            "candidate_id": f"{session_id}-{uuid.uuid4().hex[:8]}",
            "session_id": session_id,
            "parent": body.candidate_id,
            "node_order": [node.node_id for node in ordered],
            "floorplan": floorplan_to_dict(refined),
            "trace": trace.to_lists(),
            "compatibility": compatibility(diagram, refined),
        }
        store.record(
            session_id,
            {"event": "refine", "candidate_id": body.candidate_id, "iters": body.iters},
            [out],
        )
        return out

    @app.get("/v1/render/{candidate_id}.svg")
    def render(candidate_id: str) -> Response:
        doc = store.candidate(candidate_id)
        fp = floorplan_from_dict(doc["floorplan"], DEFAULT_VOCAB)
        return Response(render_svg(fp), media_type="image/svg+xml")

    app.state.store = store
    app.state.pipeline = pipeline
    return app


def app_from_env() -> FastAPI:
    """Build the app from PLANFORGE_MODEL / PLANFORGE_STORE."""
    return create_app(
        model_path=os.environ.get("PLANFORGE_MODEL"),
        store_path=os.environ.get("PLANFORGE_STORE"),
    )
