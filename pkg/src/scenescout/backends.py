"""Model backends: one interface, three implementations.

``RemoteBackend`` talks to an OpenAI-style chat-completions endpoint with
retries and a per-call timeout. ``ScriptedBackend`` replays canned responses
in order, which makes whole runs reproducible and lets an audit log stand in
for the original model. ``RuleBasedBackend`` answers each role with
deterministic rules over the live world - it emits the same wire-format text
a model would, so the rest of the loop cannot tell the difference and audit
replay works uniformly.

Every completed call is appended to an audit log (role, prompt, request
hash, response, call tick) regardless of backend.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graphs import (
    PLACEMENT_RELATIONS,
    Relation,
    SceneGraph,
    graph_from_json,
    graph_to_json,
    serialize_graph_text,
)
from .prompting import (
    END_ACTIONS,
    END_DECISION,
    END_REASON,
    END_SCRATCH,
    START_ACTIONS,
    START_DECISION,
    START_REASON,
    START_SCRATCH,
)
from .simulator import Status, World
from .skills import (
    SkillCommand,
    arrange,
    serialize_skill,
    skill_from_json,
    skill_to_json,
)

DESCRIBER = "describer"
EXPLORER = "explorer"
VERIFIER = "verifier"

DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 3
API_KEY_ENV = "SCENESCOUT_API_KEY"


class BackendError(Exception):
    pass


class TransportError(BackendError):
    pass


class AuthRejected(BackendError):
    pass


class ScriptExhausted(BackendError):
    pass


class BudgetExceeded(BackendError):
    pass


@dataclass
class ChatRequest:
    role: str
    user_text: str = ""
    system_text: str = ""
    images: list[tuple[str, str]] = field(default_factory=list)  # (media type, base64)
    temperature: float = 0.0
    max_tokens: int = 2048
    context: Optional[dict] = None  # structured payload for rule backends

    def __post_init__(self):
        if not self.user_text and not self.images:
            raise ValueError("a request needs user text or at least one image")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.role.encode())
        h.update(self.system_text.encode())
        h.update(self.user_text.encode())
        for media, data in self.images:
            h.update(media.encode())
            h.update(data.encode())
        return h.hexdigest()


class AuditLog:
    """Append-only ndjson log of every backend call."""

    def __init__(self, path: Optional[Path | str] = None):
        self.path = Path(path) if path else None
        self.records: list[dict] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record: dict) -> None:
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    @staticmethod
    def read(path: Path | str) -> list[dict]:
        out = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                out.append(json.loads(line))
        return out


class Backend:
    """Base: budget accounting and audit logging around ``_complete``."""

    kind = "abstract"

    def __init__(self, audit: Optional[AuditLog] = None, max_calls: Optional[int] = None):
        self.audit = audit
        self.max_calls = max_calls
        self.calls = 0

    def complete(self, req: ChatRequest) -> str:
        if self.max_calls is not None and self.calls >= self.max_calls:
            raise BudgetExceeded(f"call budget of {self.max_calls} spent")
        self.calls += 1
        text = self._complete(req)
        if self.audit is not None:
            self.audit.append(
                {
                    "tick": self.calls,
                    "role": req.role,
                    "backend": self.kind,
                    "request": {"system": req.system_text, "user": req.user_text},
                    "request_hash": req.digest(),
                    "response": text,
                }
            )
        return text

    def _complete(self, req: ChatRequest) -> str:
        raise NotImplementedError


class RemoteBackend(Backend):
    """OpenAI-compatible chat-completions client over HTTPS."""

    kind = "remote"

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        backoff: float = 0.5,
        **kwargs,
    ):
        super().__init__(**kwargs)
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _payload(self, req: ChatRequest) -> dict:
        content: list[dict] | str
        if req.images:
            content = [{"type": "text", "text": req.user_text}] + [
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:{media};base64,{data}"},
                }
                for media, data in req.images
            ]
        else:
            content = req.user_text
        messages = []
        if req.system_text:
            messages.append({"role": "system", "content": req.system_text})
        messages.append({"role": "user", "content": content})
        return {
            "model": self.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }

    def _complete(self, req: ChatRequest) -> str:
        import httpx

        url = f"{self.base_url}/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = httpx.post(
                    url, json=self._payload(req), headers=headers, timeout=self.timeout
                )
            except httpx.HTTPError as err:
                last_error = err
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code in (401, 403):
                raise AuthRejected(f"endpoint rejected credentials ({resp.status_code})")
            if resp.status_code >= 500 or resp.status_code == 429:
                last_error = TransportError(f"status {resp.status_code}")
                time.sleep(self.backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise TransportError(f"unexpected status {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as err:
                raise TransportError(f"malformed completion payload: {err}") from err
        raise TransportError(f"gave up after {self.retries} attempts: {last_error}")


class ScriptedBackend(Backend):
    """Replays recorded responses in order; the audit-log schema is accepted
    directly, so any run can be replayed from its own audit file."""

    kind = "scripted"

    def __init__(self, records: Sequence[dict], **kwargs):
        super().__init__(**kwargs)
        self.script = [
            {"role": r.get("role", ""), "response": r["response"]} for r in records
        ]
        self.cursor = 0

    @classmethod
    def from_file(cls, path: Path | str, **kwargs) -> "ScriptedBackend":
        return cls(AuditLog.read(path), **kwargs)

    def _complete(self, req: ChatRequest) -> str:
        if self.cursor >= len(self.script):
            raise ScriptExhausted(f"script has only {len(self.script)} responses")
        record = self.script[self.cursor]
        self.cursor += 1
        return record["response"]


# ---------------------------------------------------------------------------
# Rule-based backend
# ---------------------------------------------------------------------------


def _try_relation_move(world: World, subject: str, rel: Relation, target: str):
    """Evaluate one relation move on ``world`` without keeping it: returns
    the post-move evaluation graph, or None when the move is infeasible.
    Only exposed subjects are offered, so the mutation is a single pose."""
    from .simulator import OutOfBoundsError, TargetStackFull

    try:
        x, y, z = world.compute_drop_point(subject, rel, target)
    except (OutOfBoundsError, TargetStackFull):
        return None
    if z == 0 and not world._spot_is_clear(subject, x, y):
        return None
    pose = world.objects[subject]
    saved = (pose.x, pose.y, pose.z_level, pose.support)
    pose.x, pose.y, pose.z_level = x, y, z
    pose.support = world.top_of_stack(target, ignoring=subject) if z > 0 else None
    graph = world.extract_eval_graph()
    pose.x, pose.y, pose.z_level, pose.support = saved
    return graph


def enumerate_relation_moves(world: World) -> list[tuple[SkillCommand, SceneGraph]]:
    """All feasible single relation moves with their resulting graphs.

    Subjects must be exposed (nothing stacked on them); stacking targets
    the exposed top of a stack; placements that would land out of bounds or
    on another object are skipped, so proposals execute cleanly. The
    resulting graph is computed geometrically, not guessed.
    """
    names = world.catalog()
    tops = [n for n in names if not world.objects_above(n)]
    candidates: list[tuple[SkillCommand, SceneGraph]] = []
    for subject in tops:
        for target in names:
            if target == subject:
                continue
            for rel in PLACEMENT_RELATIONS:
                if rel is Relation.STACKED_ON:
                    if world.top_of_stack(target, ignoring=subject) != target:
                        continue
                elif world.objects[target].z_level != 0:
                    continue
                graph = _try_relation_move(world, subject, rel, target)
                if graph is None:
                    continue
                skill = SkillCommand("relation_move", subject, rel, target)
                candidates.append((skill, graph))
    return candidates


def rule_based_explore(
    world: World,
    memory_hits: Sequence[SceneGraph],
    rng: np.random.Generator,
    max_skills: int = 3,
    current_graph: Optional[SceneGraph] = None,
) -> tuple[list[SkillCommand], SceneGraph]:
    """Greedy novelty proposal: one relation move maximizing the minimum
    edit distance from the resulting graph to the retrieved memory graphs
    (ties broken with the rng). A single move per step keeps the proposal
    inside the retrieval neighborhood, which is where revisits are visible;
    longer plans than needed only spend moves the metrics never see.

    Moves are scored geometrically against the live poses, so the desired
    graph is exactly what executing the plan would produce. With empty
    memory every candidate scores infinity and the choice is uniform. If
    every immediate successor is already in memory (distance 0) the step
    falls back to arranging a random exposed object.
    """
    del max_skills  # single-move plans always satisfy the length bound
    graph = current_graph if current_graph is not None else world.extract_eval_graph()

    def novelty(g: SceneGraph) -> float:
        if not memory_hits:
            return math.inf
        from .graphs import graph_distance

        return min(graph_distance(g, m) for m in memory_hits)

    pool = [(s, g) for s, g in enumerate_relation_moves(world) if g != graph]
    if pool:
        scores = [novelty(g) for _s, g in pool]
        best = max(scores)
        if best > 0:
            picks = [i for i, s in enumerate(scores) if s == best]
            skill, predicted = pool[picks[int(rng.integers(len(picks)))]]
            return [skill], predicted
    # every reachable neighbor is already remembered (or nothing can move)
    subject = _arrange_fallback_subject(world, graph, rng)
    return [arrange(subject)], _predict_after_arrange(graph, subject)


def _arrange_fallback_subject(world: World, graph: SceneGraph, rng) -> str:
    from .graphs import label_key

    tops = [n for n in world.catalog() if not world.objects_above(n)]
    with_edges = [
        n
        for n in tops
        if any(label_key(a) == label_key(n) or label_key(b) == label_key(n) for a, _r, b in graph.edges)
    ]
    pool = with_edges or tops or world.catalog()
    return pool[int(rng.integers(len(pool)))]


def _predict_after_arrange(graph: SceneGraph, subject: str) -> SceneGraph:
    from .graphs import label_key

    sk = label_key(subject)
    kept = [
        (a, r, b) for a, r, b in graph.edges if label_key(a) != sk and label_key(b) != sk
    ]
    return SceneGraph.make(graph.nodes, kept)


class RuleBasedBackend(Backend):
    """Deterministic offline stand-in for the model, answering all three
    roles over the live world. Responses use the same marker grammar as a
    real model so parsing, auditing, and replay are identical."""

    kind = "rule_based"

    def __init__(self, world: World, rng: Optional[np.random.Generator] = None, **kwargs):
        super().__init__(**kwargs)
        self.world = world
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def _complete(self, req: ChatRequest) -> str:
        if req.role == DESCRIBER:
            return self._describe()
        if req.role == EXPLORER:
            return self._explore(req.context or {})
        if req.role == VERIFIER:
            return self._verify(req.context or {})
        raise BackendError(f"rule backend has no rule for role {req.role!r}")

    def _describe(self) -> str:
        graph = self.world.extract_eval_graph()
        return (
            "[Step 3: Final Scene Graph Output]\n" + serialize_graph_text(graph)
        )

    def _explore(self, context: dict) -> str:
        # novelty is judged against everything memory has seen; the
        # windowed retrieval is only how much a prompt can show
        hits_json = context.get("visited_graphs", context.get("memory_hits", []))
        hits = [graph_from_json(g) for g in hits_json]
        current = (
            graph_from_json(context["current_graph"])
            if context.get("current_graph")
            else None
        )
        max_skills = int(context.get("max_skills", 3))
        plan, predicted = rule_based_explore(
            self.world, hits, self.rng, max_skills=max_skills, current_graph=current
        )
        lines = "\n".join(serialize_skill(s) for s in plan)
        from .graphs import END_DESIRED_GRAPH, START_DESIRED_GRAPH

        return (
            f"{START_SCRATCH}\n"
            "greedy novelty rule: maximize edit distance to retrieved memory\n"
            f"{END_SCRATCH}\n"
            "Predict (Desired) Future Scene Graph:\n"
            + serialize_graph_text(predicted, markers=(START_DESIRED_GRAPH, END_DESIRED_GRAPH))
            + f"\nNext Action Sequence:\n{START_ACTIONS}\n{lines}\n{END_ACTIONS}"
        )

    def _verify(self, context: dict) -> str:
        skills = [skill_from_json(s) for s in context.get("plan_skills", [])]
        sim = self.world.clone()
        sim.p_fail = 0.0  # judge the nominal plan, not luck
        problems: list[str] = []
        for i, skill in enumerate(skills, start=1):
            outcome = sim.execute_skill(skill)
            if outcome.status is not Status.SUCCESS:
                problems.append(
                    f"action {i} ({serialize_skill(skill)}) would end {outcome.status.value}: {outcome.note}"
                )
        decision = "YES" if not problems else "NO"
        reason = "" if not problems else "; ".join(problems)
        return (
            f"{START_SCRATCH}\n"
            f"simulated {len(skills)} action(s) against a copy of the scene\n"
            f"{END_SCRATCH}\n"
            f"{START_DECISION}\n{decision}\n{END_DECISION}\n"
            f"{START_REASON}\n{reason}\n{END_REASON}"
        )


def skills_context(skills: Sequence[SkillCommand], desired: SceneGraph) -> dict:
    return {
        "plan_skills": [skill_to_json(s) for s in skills],
        "desired_graph": graph_to_json(desired),
    }


def explore_context(
    current: SceneGraph,
    hits: Sequence[SceneGraph],
    max_skills: int,
    visited: Optional[Sequence[SceneGraph]] = None,
) -> dict:
    ctx = {
        "current_graph": graph_to_json(current),
        "memory_hits": [graph_to_json(g) for g in hits],
        "max_skills": max_skills,
    }
    if visited is not None:
        ctx["visited_graphs"] = [graph_to_json(g) for g in visited]
    return ctx
