"""HTTP facade over a live session: the surface the operator console (and
any external tooling) drives.

One session per server process. Human operators submit skill lines through
POST /skill; every executed command is recorded as a transition in exactly
the same schema as autonomous runs, so the metrics pipeline and dataset
export consume human sessions unchanged. Mutating endpoints are serialized
behind a lock; reads snapshot consistent state.
"""

from __future__ import annotations

import json
import tempfile
import threading
from importlib import resources
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from .graphs import graph_to_json, serialize_graph_text
from .grid import GRID_COLS, GRID_ROWS, all_cells
from .memory import MemoryStore, Transition
from .metrics import VisitationStats, metrics_report, state_entropy, unique_scene_graphs
from .simulator import SimError, World, load_scenario, packaged_scenario_path
from .skills import SkillCommand, skill_from_json
from .metrics import EmptyLog

MODE_HUMAN = "human_operator"
MODE_OBSERVER = "observer"


class SkillBody(BaseModel):
    line: Optional[str] = None
    kind: Optional[str] = None
    subject: Optional[str] = None
    relation: Optional[str] = None
    target: Optional[str] = None
    cell: Optional[str] = None


class ResetBody(BaseModel):
    scenario: Optional[str] = None
    seed: int = 0


class TeleportBody(BaseModel):
    object: str
    x: float
    y: float


class Session:
    """A live world plus its transition log."""

    def __init__(self, scenario: str, seed: int, directory: Path, mode: str):
        self.scenario = scenario
        self.seed = seed
        self.mode = mode
        self.world: World = load_scenario(packaged_scenario_path(scenario), seed=seed)
        self.directory = directory
        self.store = MemoryStore(directory)
        self.tick = 0
        self.last_moved: list[str] = []

    def close(self):
        self.store.close()

    # -- views -------------------------------------------------------------

    def quick_metrics(self) -> dict:
        stats = VisitationStats.from_transitions(self.store.transitions)
        if not stats.states:
            return {"unique": 0, "entropy_nats": 0.0}
        try:
            entropy = state_entropy(stats)
        except EmptyLog:
            entropy = 0.0
        return {"unique": unique_scene_graphs(stats), "entropy_nats": entropy}

    def state_json(self) -> dict:
        graph = self.world.extract_eval_graph()
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "mode": self.mode,
            "step_count": self.world.step_count,
            "transition_count": len(self.store.transitions),
            "objects": self.world.observation(),
            "graph": graph_to_json(graph),
            "graph_text": serialize_graph_text(graph),
            "metrics": self.quick_metrics(),
            "grid": {
                "rows": list(GRID_ROWS),
                "cols": list(GRID_COLS),
                "cells": [c.ident for c in all_cells()],
            },
            "svg": "/render.svg",
            "catalog": self.world.catalog(),
            "last_moved": self.last_moved,
        }

    # -- mutations -----------------------------------------------------------

    def execute(self, skill: SkillCommand) -> dict:
        eval_before = self.world.extract_eval_graph()
        outcome = self.world.execute_skill(skill)
        eval_after = self.world.extract_eval_graph()
        tr = Transition(
            index=len(self.store.transitions),
            before=eval_before,
            skills=[skill],
            after=eval_after,
            outcomes=[outcome.to_json()],
            eval_before=eval_before,
            eval_after=eval_after,
            tick=self.tick,
            actor="human",
        )
        self.tick += 1
        self.store.record(tr)
        self.last_moved = [name for name, _old, _new in outcome.moved]
        return outcome.to_json()

    def teleport(self, name: str, x: float, y: float) -> dict:
        eval_before = self.world.extract_eval_graph()
        resolved = self.world.lookup(name)
        pose = self.world.objects[resolved]
        if not self.world.bounds.contains(x, y, inset=pose.footprint.bound):
            raise SimError(f"({x:.3f}, {y:.3f}) is outside the workspace")
        old = pose.to_json()
        for above in self.world.objects_above(resolved):
            p = self.world.objects[above]
            p.z_level, p.support = 0, None  # lifted off by hand
        pose.x, pose.y, pose.z_level, pose.support = x, y, 0, None
        eval_after = self.world.extract_eval_graph()
        tr = Transition(
            index=len(self.store.transitions),
            before=eval_before,
            skills=[],
            after=eval_after,
            outcomes=[{"status": "Success", "moved": [{"name": resolved, "old": old, "new": pose.to_json()}], "note": "teleport"}],
            eval_before=eval_before,
            eval_after=eval_after,
            tick=self.tick,
            actor="teleport",
        )
        self.tick += 1
        self.store.record(tr)
        self.last_moved = [resolved]
        return {"status": "Success", "moved": [{"name": resolved}], "note": "teleport"}


def create_app(
    scenario: str = "blocks5",
    seed: int = 0,
    out: Optional[str] = None,
    observer: bool = False,
    console_dir: Optional[str] = None,
) -> FastAPI:
    base_dir = Path(out) if out else Path(tempfile.mkdtemp(prefix="scenescout-session-"))
    base_dir.mkdir(parents=True, exist_ok=True)
    mode = MODE_OBSERVER if observer else MODE_HUMAN

    app = FastAPI(title="scenescout session")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    lock = threading.Lock()
    counter = {"n": 0}

    def new_session(scn: str, sd: int) -> Session:
        session_dir = base_dir / f"session_{counter['n']:03d}"
        counter["n"] += 1
        return Session(scn, sd, session_dir, mode)

    try:
        app.state.session = new_session(scenario, seed)
    except (FileNotFoundError, SimError) as err:
        from .engine import ConfigError

        raise ConfigError(str(err)) from err

    def session() -> Session:
        s = getattr(app.state, "session", None)
        if s is None:
            raise HTTPException(status_code=404, detail="no active session")
        return s

    @app.get("/state")
    def get_state():
        with lock:
            return session().state_json()

    @app.get("/render.svg")
    def get_render():
        with lock:
            svg = session().world.render_svg(highlight=session().last_moved)
        return Response(content=svg, media_type="image/svg+xml")

    @app.get("/schema/state.json")
    def get_schema():
        body = (resources.files("scenescout") / "schemas" / "state.schema.json").read_text(
            encoding="utf-8"
        )
        return json.loads(body)

    @app.post("/skill")
    def post_skill(body: SkillBody):
        s = session()
        if s.mode != MODE_HUMAN:
            raise HTTPException(status_code=409, detail="session is read-only (observer mode)")
        with lock:
            try:
                if body.line is not None:
                    from .skills import parse_skill

                    skill = parse_skill(body.line, s.world.catalog())
                elif body.kind is not None:
                    skill = skill_from_json(body.model_dump(exclude_none=True))
                    skill = parse_roundtrip(skill, s.world.catalog())
                else:
                    raise HTTPException(status_code=400, detail="body needs 'line' or 'kind'")
            except HTTPException:
                raise
            except Exception as err:
                raise HTTPException(status_code=400, detail=f"{type(err).__name__}: {err}")
            try:
                outcome = s.execute(skill)
            except SimError as err:
                raise HTTPException(status_code=400, detail=str(err))
            return {
                "outcome": outcome,
                "metrics": s.quick_metrics(),
                "transition_count": len(s.store.transitions),
            }

    @app.post("/teleport")
    def post_teleport(body: TeleportBody):
        s = session()
        if s.mode != MODE_HUMAN:
            raise HTTPException(status_code=409, detail="session is read-only (observer mode)")
        with lock:
            try:
                outcome = s.teleport(body.object, body.x, body.y)
            except SimError as err:
                raise HTTPException(status_code=400, detail=str(err))
            return {"outcome": outcome, "metrics": s.quick_metrics()}

    @app.post("/reset")
    def post_reset(body: ResetBody):
        nonlocal_scenario = body.scenario or session().scenario
        with lock:
            try:
                fresh = new_session(nonlocal_scenario, body.seed)
            except (FileNotFoundError, SimError) as err:
                raise HTTPException(status_code=400, detail=f"bad scenario: {err}")
            session().close()
            app.state.session = fresh
            return fresh.state_json()

    @app.get("/trajectory")
    def get_trajectory():
        with lock:
            path = session().directory / "transitions.ndjson"
            text = path.read_text(encoding="utf-8") if path.exists() else ""
        return PlainTextResponse(text, media_type="application/x-ndjson")

    @app.get("/metrics")
    def get_metrics():
        with lock:
            stats = VisitationStats.from_transitions(session().store.transitions)
            return metrics_report(stats, config_echo={"scenario": session().scenario, "seed": session().seed})

    @app.get("/session-dir")
    def get_session_dir():
        return {"directory": str(session().directory)}

    if console_dir and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def parse_roundtrip(skill: SkillCommand, catalog) -> SkillCommand:
    """Validate a structured skill body by round-tripping it through the
    line grammar, resolving names against the catalog."""
    from .skills import parse_skill, serialize_skill

    return parse_skill(serialize_skill(skill), catalog)
