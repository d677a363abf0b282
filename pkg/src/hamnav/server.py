"""Serve-mode REST API consumed by the browser UI.

All state lives in memory keyed by ids; each auto-mode episode runs on its
own worker thread, while manual-mode episodes advance one step per POST so
the UI can inspect every decision.
"""

from __future__ import annotations

import io
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Response, UploadFile
from PIL import Image
from pydantic import BaseModel

from .errors import BundleError, HamNavError
from .pipeline import RUNNING, AblationFlags, EpisodeSession, PipelineConfig
from .reasoning import OracleRules, RemoteConfig, make_backend
from .sketchmap import HandDrawnMap, parse_bundle
from .simulator import fixture_world_names, load_fixture_world


@dataclass
class EpisodeEntry:
    session: EpisodeSession
    mode: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    metrics: "dict | None" = None
    error: "str | None" = None

    def status(self) -> str:
        if self.error:
            return "aborted"
        return self.session.state.status


class EpisodeRequest(BaseModel):
    sketch_id: str
    world_id: str
    backend: str = "oracle"
    flags: "list[str] | str" = []
    seed: int = 0
    mode: str = "auto"  # auto | manual
    max_steps: "int | None" = None
    remote_url: "str | None" = None
    remote_model: str = "gpt-4o"


def create_app(rules: "OracleRules | None" = None) -> FastAPI:
    app = FastAPI(title="hamnav")
    sketches: dict[str, HandDrawnMap] = {}
    episodes: dict[str, EpisodeEntry] = {}
    registry_lock = threading.Lock()
    oracle_rules = rules or OracleRules()

    @app.get("/api/worlds")
    def list_worlds():
        out = []
        for name in fixture_world_names():
            world = load_fixture_world(name)
            out.append({
                "id": name,
                "name": world.name,
                "floors": len(world.floors),
                "cell_size": world.cell_size,
                "landmarks": sorted({lm.label for lm in world.landmarks}),
            })
        return out

    @app.post("/api/sketches", status_code=201)
    async def upload_sketch(bundle: UploadFile):
        data = await bundle.read()
        try:
            hmap = parse_bundle(data)
        except BundleError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        sketch_id = uuid.uuid4().hex[:12]
        with registry_lock:
            sketches[sketch_id] = hmap
        return {"sketch_id": sketch_id, "landmarks": len(hmap.landmarks),
                "path_vertices": len(hmap.path)}

    def _finalize(entry: EpisodeEntry) -> None:
        _, metrics = entry.session.finalize()
        entry.metrics = {
            "success": metrics.success,
            "spl": round(metrics.spl, 6),
            "distance_m": round(metrics.distance_m, 6),
            "steps": metrics.steps,
            "backend_latency_s": round(metrics.backend_latency_s, 6),
        }

    def _run_to_end(entry: EpisodeEntry) -> None:
        try:
            with entry.lock:
                while not entry.session.done:
                    entry.session.advance()
                _finalize(entry)
        except HamNavError as exc:
            entry.error = str(exc)

    @app.post("/api/episodes", status_code=201)
    def create_episode(req: EpisodeRequest):
        with registry_lock:
            hmap = sketches.get(req.sketch_id)
        if hmap is None:
            raise HTTPException(status_code=404, detail=f"unknown sketch {req.sketch_id}")
        if req.world_id not in fixture_world_names():
            raise HTTPException(status_code=404, detail=f"unknown world {req.world_id}")
        if req.mode not in ("auto", "manual"):
            raise HTTPException(status_code=422, detail="mode must be auto or manual")
        world = load_fixture_world(req.world_id)
        try:
            flags = AblationFlags.from_names(req.flags)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        remote_config = None
        if req.backend == "remote":
            if not req.remote_url:
                raise HTTPException(status_code=422, detail="remote backend needs remote_url")
            remote_config = RemoteConfig(base_url=req.remote_url, model=req.remote_model)
        try:
            backend = make_backend(req.backend, rules=oracle_rules, remote_config=remote_config)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        config = PipelineConfig(max_steps=req.max_steps)
        session = EpisodeSession(hmap, world, backend, flags, seed=req.seed, config=config)
        entry = EpisodeEntry(session=session, mode=req.mode)
        episode_id = uuid.uuid4().hex[:12]
        with registry_lock:
            episodes[episode_id] = entry
        if req.mode == "auto":
            threading.Thread(target=_run_to_end, args=(entry,), daemon=True).start()
        return {"episode_id": episode_id}

    def _entry(episode_id: str) -> EpisodeEntry:
        with registry_lock:
            entry = episodes.get(episode_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown episode {episode_id}")
        return entry

    @app.get("/api/episodes/{episode_id}")
    def episode_status(episode_id: str):
        entry = _entry(episode_id)
        with entry.lock:
            return {
                "status": entry.status(),
                "mode": entry.mode,
                "error": entry.error,
                "metrics": entry.metrics,
                "steps": list(entry.session.trace.records),
                "plan": list(entry.session.state.plan.sentences),
            }

    @app.post("/api/episodes/{episode_id}/advance")
    def advance_episode(episode_id: str):
        entry = _entry(episode_id)
        if entry.mode != "manual":
            raise HTTPException(status_code=409, detail="episode is not in manual mode")
        with entry.lock:
            if entry.session.done:
                raise HTTPException(status_code=409, detail="episode already finished")
            step_trace = entry.session.advance()
            if entry.session.done and entry.metrics is None:
                _finalize(entry)
            return {"status": entry.status(), "step": step_trace.to_record()}

    @app.get("/api/episodes/{episode_id}/svap/{t}")
    def episode_svap(episode_id: str, t: int):
        entry = _entry(episode_id)
        with entry.lock:
            images = entry.session.svap_images
            if t < 0 or t >= len(images):
                raise HTTPException(status_code=404, detail=f"no svap image for step {t}")
            image = images[t]
        buf = io.BytesIO()
        Image.fromarray(np.asarray(image)).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    return app
