"""Persistent transition memory: what happened, and which scene graphs have
been visited.

Transitions append to a newline-delimited JSON log (one schema-version
header line, then one record per line) and flush before the recording call
returns, so a crash can lose at most the record being written. The graph
catalog - every distinct canonical graph with its first-visit index - is
rebuilt from the log on load and snapshotted to a side file for consumers.

Retrieval is distance-thresholded: graphs within ``tau`` edits of the query,
most similar first, capped at ``cap`` entries.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .graphs import SceneGraph, graph_distance, graph_from_json, graph_to_json
from .prompting import VerifierFeedback
from .skills import SkillCommand, skill_from_json, skill_to_json

SCHEMA = "scenescout.transitions/1"
DEFAULT_TAU = 4.0
DEFAULT_CAP = 5

TRANSITIONS_FILE = "transitions.ndjson"
GRAPHS_FILE = "graphs.json"


class PersistenceFailure(Exception):
    """Disk write failed; the run must halt rather than lose data silently."""


@dataclass
class Transition:
    index: int
    before: SceneGraph
    skills: list[SkillCommand]
    after: SceneGraph
    outcomes: list[dict] = field(default_factory=list)
    verifier_rounds: list[VerifierFeedback] = field(default_factory=list)
    eval_before: Optional[SceneGraph] = None
    eval_after: Optional[SceneGraph] = None
    desired: Optional[SceneGraph] = None  # the imagined goal graph, if any
    tick: int = 0
    actor: str = "agent"
    wall_time: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "tick": self.tick,
            "actor": self.actor,
            "before": graph_to_json(self.before),
            "after": graph_to_json(self.after),
            "eval_before": graph_to_json(self.eval_before) if self.eval_before else None,
            "eval_after": graph_to_json(self.eval_after) if self.eval_after else None,
            "desired": graph_to_json(self.desired) if self.desired else None,
            "skills": [skill_to_json(s) for s in self.skills],
            "skill_lines": [self._line(s) for s in self.skills],
            "outcomes": self.outcomes,
            "verifier_rounds": [v.to_json() for v in self.verifier_rounds],
            "wall_time": self.wall_time,
        }

    @staticmethod
    def _line(skill: SkillCommand) -> str:
        from .skills import serialize_skill

        return serialize_skill(skill)

    @staticmethod
    def from_json(data: dict) -> "Transition":
        return Transition(
            index=int(data["index"]),
            before=graph_from_json(data["before"]),
            skills=[skill_from_json(s) for s in data["skills"]],
            after=graph_from_json(data["after"]),
            outcomes=data.get("outcomes", []),
            verifier_rounds=[VerifierFeedback.from_json(v) for v in data.get("verifier_rounds", [])],
            eval_before=graph_from_json(data["eval_before"]) if data.get("eval_before") else None,
            eval_after=graph_from_json(data["eval_after"]) if data.get("eval_after") else None,
            desired=graph_from_json(data["desired"]) if data.get("desired") else None,
            tick=int(data.get("tick", 0)),
            actor=data.get("actor", "agent"),
            wall_time=data.get("wall_time"),
        )


class MemoryStore:
    """Single-writer transition log plus visited-graph catalog.

    ``directory=None`` keeps everything in memory (tests, throwaway
    sessions); otherwise records are durable before ``record`` returns.
    """

    def __init__(
        self,
        directory: Optional[Path | str] = None,
        tau: float = DEFAULT_TAU,
        cap: int = DEFAULT_CAP,
    ):
        self.tau = tau
        self.cap = cap
        self.directory = Path(directory) if directory is not None else None
        self.transitions: list[Transition] = []
        self._graphs: list[tuple[SceneGraph, int]] = []  # (graph, first-visit index)
        self._graph_keys: set[str] = set()
        self._fh = None
        if self.directory is not None:
            try:
                self.directory.mkdir(parents=True, exist_ok=True)
                path = self.directory / TRANSITIONS_FILE
                fresh = not path.exists() or path.stat().st_size == 0
                self._fh = open(path, "a", encoding="utf-8")
                if fresh:
                    header = {"schema": SCHEMA, "tau": self.tau, "cap": self.cap}
                    self._fh.write(json.dumps(header, sort_keys=True) + "\n")
                    self._fh.flush()
                    os.fsync(self._fh.fileno())
            except OSError as err:
                raise PersistenceFailure(str(err)) from err

    # -- loading -----------------------------------------------------------

    @classmethod
    def load(cls, directory: Path | str, tau: Optional[float] = None, cap: Optional[int] = None) -> "MemoryStore":
        directory = Path(directory)
        path = directory / TRANSITIONS_FILE
        lines = path.read_text(encoding="utf-8").splitlines() if path.exists() else []
        header: dict = {}
        records: list[Transition] = []
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                break  # truncated tail from a crash; keep the clean prefix
            if i == 0 and "schema" in data:
                header = data
                continue
            records.append(Transition.from_json(data))
        store = cls(
            directory=directory,
            tau=tau if tau is not None else float(header.get("tau", DEFAULT_TAU)),
            cap=cap if cap is not None else int(header.get("cap", DEFAULT_CAP)),
        )
        for tr in records:
            store.transitions.append(tr)
            store._note_graphs(tr)
        return store

    # -- recording ---------------------------------------------------------

    def record(self, tr: Transition) -> None:
        """Append one transition durably and index its graphs.

        The index must be the next contiguous slot; the write reaches disk
        before the method returns.
        """
        if tr.index != len(self.transitions):
            raise ValueError(
                f"out-of-order transition: index {tr.index}, expected {len(self.transitions)}"
            )
        if not tr.skills and tr.actor != "teleport":
            # hand-teleports have no skill; every commanded step must
            raise ValueError("a transition must carry at least one skill")
        if self._fh is not None:
            try:
                self._fh.write(json.dumps(tr.to_json(), sort_keys=True) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as err:
                raise PersistenceFailure(str(err)) from err
        self.transitions.append(tr)
        self._note_graphs(tr)
        if self.directory is not None:
            self._write_graph_catalog()

    def _note_graphs(self, tr: Transition) -> None:
        # Both endpoints were encountered, so both are retrievable; the
        # catalog keys on canonical form, first visit wins.
        for g in (tr.before, tr.after):
            key = g.canonical_key()
            if key not in self._graph_keys:
                self._graph_keys.add(key)
                self._graphs.append((g, tr.index))

    def _write_graph_catalog(self) -> None:
        path = self.directory / GRAPHS_FILE
        payload = {
            "schema": "scenescout.graphs/1",
            "graphs": [
                {"first_visit": idx, **graph_to_json(g)} for g, idx in self._graphs
            ],
        }
        tmp = path.with_suffix(".json.tmp")
        try:
            tmp.write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
            tmp.replace(path)
        except OSError as err:
            raise PersistenceFailure(str(err)) from err

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- queries -----------------------------------------------------------

    def unique_graphs(self) -> list[SceneGraph]:
        return [g for g, _idx in self._graphs]

    def retrieve_similar(self, g: SceneGraph) -> list[SceneGraph]:
        """Stored graphs within ``tau`` edits of ``g``, most similar first,
        ties by first-visit order, truncated to ``cap``."""
        scored = [
            (graph_distance(g, stored), idx, stored)
            for stored, idx in self._graphs
            if graph_distance(g, stored) < self.tau
        ]
        scored.sort(key=lambda t: (t[0], t[1]))
        return [stored for _d, _i, stored in scored[: self.cap]]

    def recent_window(self, h: int) -> list[Transition]:
        if h < 0:
            raise ValueError("window must be >= 0")
        return self.transitions[-h:] if h else []
