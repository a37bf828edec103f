"""HTTP API and on-disk session persistence for interactive evolution.

A session is one directory under the storage root: ``session.json`` for
the state machine, plus one ``gen_<i>/`` directory per committed
generation holding OBJ + sidecar files and a ``manifest.json``. All
responses are pure functions of this on-disk state; the only in-memory
bookkeeping is the single-flight lock around ``advance``, whose work
runs in a background thread while clients poll.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import FileResponse, JSONResponse, Response
from pydantic import BaseModel

from .errors import (
    DatasetInvalid,
    FameError,
    UnknownGeneration,
    UnknownShapeId,
    WrongStatus,
)
from .evolution import EvolutionConfig, Generation, evolve_one_generation, score_shape
from .functionality.models import load_models
from .shape_model import Shape, load_population, load_shape, save_shape

import numpy as np

STATUS_AWAITING = "AwaitingSelection"
STATUS_EVOLVING = "Evolving"
STATUS_DONE = "Done"
STATUS_ERROR = "Error"


# ------------------------------------------------------------------
# Persistence
# ------------------------------------------------------------------

@dataclass
class SessionState:
    session_id: str
    config: EvolutionConfig
    status: str
    generation_count: int
    selected: dict[int, list[str]]
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "config": self.config.to_dict(),
            "status": self.status,
            "generation_count": self.generation_count,
            "selected": {str(k): v for k, v in self.selected.items()},
            "error": self.error,
        }

    @staticmethod
    def from_dict(d: dict) -> "SessionState":
        return SessionState(
            session_id=d["session_id"],
            config=EvolutionConfig.from_dict(d["config"]),
            status=d["status"],
            generation_count=int(d["generation_count"]),
            selected={int(k): list(v) for k, v in d.get("selected", {}).items()},
            error=d.get("error"),
        )


class SessionStore:
    """Directory-per-session persistence with single-flight advance."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._recover_interrupted()

    def _recover_interrupted(self) -> None:
        # A process death mid-advance leaves status Evolving with no worker;
        # committed generations are intact, so selection can simply resume.
        for path in self.root.glob("*/session.json"):
            state = SessionState.from_dict(json.loads(path.read_text()))
            if state.status == STATUS_EVOLVING:
                state.status = STATUS_AWAITING
                path.write_text(json.dumps(state.to_dict(), indent=2, sort_keys=True))

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _session_dir(self, session_id: str) -> Path:
        path = self.root / session_id
        if not path.is_dir():
            raise UnknownShapeId(f"unknown session {session_id!r}")
        return path

    def _read_state(self, session_id: str) -> SessionState:
        path = self._session_dir(session_id) / "session.json"
        return SessionState.from_dict(json.loads(path.read_text()))

    def _write_state(self, state: SessionState) -> None:
        path = self.root / state.session_id / "session.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(state.to_dict(), indent=2, sort_keys=True))
        tmp.replace(path)

    def _write_generation(self, session_id: str, generation: Generation) -> None:
        gen_dir = self.root / session_id / f"gen_{generation.index}"
        gen_dir.mkdir(parents=True, exist_ok=True)
        for shape in generation.shapes:
            save_shape(shape, gen_dir)
        (gen_dir / "manifest.json").write_text(generation.manifest_json())

    def _load_generation_shapes(self, session_id: str, index: int,
                                only: set[str] | None = None) -> list[Shape]:
        gen_dir = self._session_dir(session_id) / f"gen_{index}"
        if not gen_dir.is_dir():
            raise UnknownGeneration(f"session {session_id!r} has no generation {index}")
        manifest = json.loads((gen_dir / "manifest.json").read_text())
        shapes = []
        for entry in manifest["shapes"]:
            if only is not None and entry["id"] not in only:
                continue
            shapes.append(load_shape(gen_dir / f"{entry['id']}.obj"))
        return shapes

    # -- public operations ---------------------------------------------

    def create_session(self, dataset_dir: Path, config: EvolutionConfig) -> SessionState:
        try:
            population = load_population(dataset_dir)
        except FameError:
            raise
        except Exception as exc:  # unreadable files, bad json, ...
            raise DatasetInvalid(str(exc)) from exc
        if len(population) < 2:
            raise DatasetInvalid(f"dataset {dataset_dir} holds fewer than two shapes")

        session_id = uuid.uuid4().hex[:12]
        models = load_models()
        reports = [score_shape(s, models, "full", config.beam_width) for s in population]
        gen0 = Generation(
            index=0,
            shapes=population,
            scores=[r.plausibility for r in reports],
            multi_counts=[r.multi_count for r in reports],
        )
        state = SessionState(session_id=session_id, config=config,
                             status=STATUS_AWAITING, generation_count=1,
                             selected={})
        (self.root / session_id).mkdir(parents=True)
        self._write_generation(session_id, gen0)
        self._write_state(state)
        return state

    def get(self, session_id: str) -> SessionState:
        return self._read_state(session_id)

    def generation_listing(self, session_id: str, index: int) -> dict:
        gen_dir = self._session_dir(session_id) / f"gen_{index}"
        if not gen_dir.is_dir():
            raise UnknownGeneration(f"session {session_id!r} has no generation {index}")
        manifest = json.loads((gen_dir / "manifest.json").read_text())
        state = self._read_state(session_id)
        for entry in manifest["shapes"]:
            ref = f"{session_id}_{index}_{entry['id']}"
            entry["mesh_ref"] = f"{ref}.obj"
            entry["thumb_ref"] = f"{ref}/thumb.png"
        manifest["session_id"] = session_id
        manifest["status"] = state.status
        manifest["selected"] = state.selected.get(index, [])
        manifest["user_labels"] = list(state.config.user_labels)
        return manifest

    def advance(self, session_id: str, selected: list[str],
                labels: list[str] | None = None) -> SessionState:
        """Kick off one evolution iteration from the selected parents."""
        lock = self._lock(session_id)
        with lock:
            state = self._read_state(session_id)
            if state.status != STATUS_AWAITING:
                raise WrongStatus(
                    f"session {session_id!r} is {state.status}, expected {STATUS_AWAITING}")
            latest = state.generation_count - 1
            gen_dir = self._session_dir(session_id) / f"gen_{latest}"
            manifest = json.loads((gen_dir / "manifest.json").read_text())
            known = {e["id"] for e in manifest["shapes"]}
            unknown = [s for s in selected if s not in known]
            if unknown:
                raise UnknownShapeId(f"ids not in generation {latest}: {unknown}")
            if len(selected) < 2:
                raise WrongStatus("advance needs at least two selected parents")
            if labels is not None:
                state.config = EvolutionConfig.from_dict(
                    {**state.config.to_dict(), "user_labels": sorted(labels)})
            state.selected[latest] = list(selected)
            state.status = STATUS_EVOLVING
            self._write_state(state)

        worker = threading.Thread(
            target=self._run_iteration, args=(session_id, latest, list(selected)),
            daemon=True)
        worker.start()
        return state

    def _run_iteration(self, session_id: str, parent_gen: int,
                       selected: list[str]) -> None:
        lock = self._lock(session_id)
        try:
            state = self._read_state(session_id)
            parents = self._load_generation_shapes(session_id, parent_gen,
                                                   only=set(selected))
            next_index = parent_gen + 1
            rng = np.random.default_rng([state.config.rng_seed, next_index])
            generation = evolve_one_generation(parents, state.config, next_index,
                                               load_models(), rng)
            with lock:
                state = self._read_state(session_id)
                self._write_generation(session_id, generation)
                state.generation_count = next_index + 1
                state.status = (STATUS_DONE if next_index >= state.config.max_generations
                                else STATUS_AWAITING)
                self._write_state(state)
        except Exception as exc:
            with lock:
                state = self._read_state(session_id)
                state.status = STATUS_ERROR
                state.error = f"{type(exc).__name__}: {exc}"
                self._write_state(state)

    def wait_idle(self, session_id: str, timeout: float = 120.0) -> SessionState:
        """Poll until the session leaves Evolving (test/CLI convenience)."""
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            state = self._read_state(session_id)
            if state.status != STATUS_EVOLVING:
                return state
            time.sleep(0.05)
        raise TimeoutError(f"session {session_id!r} still evolving after {timeout}s")

    # -- shape artifacts ------------------------------------------------

    def resolve_ref(self, ref: str) -> tuple[str, int, str]:
        parts = ref.split("_", 2)
        if len(parts) != 3:
            raise UnknownShapeId(f"malformed shape ref {ref!r}")
        return parts[0], int(parts[1]), parts[2]

    def shape_obj_path(self, ref: str) -> Path:
        session_id, index, shape_id = self.resolve_ref(ref)
        path = self._session_dir(session_id) / f"gen_{index}" / f"{shape_id}.obj"
        if not path.is_file():
            raise UnknownShapeId(f"no mesh for ref {ref!r}")
        return path

    def thumbnail_png(self, ref: str) -> bytes:
        from .descriptor import thumbnail_image

        session_id, index, shape_id = self.resolve_ref(ref)
        cache = self._session_dir(session_id) / "thumbs"
        cache.mkdir(exist_ok=True)
        cached = cache / f"{index}_{shape_id}.png"
        if not cached.is_file():
            shape = load_shape(self._session_dir(session_id) / f"gen_{index}" / f"{shape_id}.obj")
            thumbnail_image(shape).save(cached)
        return cached.read_bytes()


# ------------------------------------------------------------------
# HTTP layer
# ------------------------------------------------------------------

class CreateSessionRequest(BaseModel):
    dataset_dir: str
    config: dict = {}


class AdvanceRequest(BaseModel):
    selected: list[str]
    labels: list[str] | None = None


_ERROR_STATUS = {
    "DatasetInvalid": 400,
    "MissingSidecar": 400,
    "DanglingPartReference": 400,
    "MalformedContactKind": 400,
    "WrongStatus": 409,
    "UnknownShapeId": 404,
    "UnknownGeneration": 404,
    "EmptyGeneration": 409,
}


def create_app(storage_root: Path | str) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    store = SessionStore(Path(storage_root))
    app = FastAPI(title="fame", version="0.1.0")
    app.state.store = store
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(FameError)
    async def _fame_error(request, exc: FameError):
        name = type(exc).__name__
        status = 400
        for klass in type(exc).__mro__:
            if klass.__name__ in _ERROR_STATUS:
                status = _ERROR_STATUS[klass.__name__]
                break
        return JSONResponse(status_code=status, content={
            "code": name, "message": str(exc), "detail": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        config = EvolutionConfig.from_dict(req.config)
        state = store.create_session(Path(req.dataset_dir), config)
        return state.to_dict()

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).to_dict()

    @app.get("/v1/sessions/{session_id}/generations/{index}")
    def get_generation(session_id: str, index: int):
        return store.generation_listing(session_id, index)

    @app.post("/v1/sessions/{session_id}/advance", status_code=202)
    def advance(session_id: str, req: AdvanceRequest):
        return store.advance(session_id, req.selected, req.labels).to_dict()

    @app.get("/v1/shapes/{ref}.obj")
    def shape_obj(ref: str):
        return FileResponse(store.shape_obj_path(ref), media_type="text/plain")

    @app.get("/v1/shapes/{ref}/thumb.png")
    def shape_thumb(ref: str):
        return Response(content=store.thumbnail_png(ref), media_type="image/png")

    return app
