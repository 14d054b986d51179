"""The three agent roles and the step cycle that ties them together.

One step: describe the scene into a graph, propose a novel desired graph
plus a skill plan (with memory retrieval feeding the prompt), check the plan
(re-planning on rejection, up to the retry budget), execute every skill in
order, describe the result, and record the transition. Rejected steps leave
memory untouched and surface as structured rejection records instead.

The describer can run through the backend, read ground truth straight from
the simulator, or add seeded edge noise to ground truth for robustness
experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .backends import Backend, ChatRequest, explore_context, skills_context
from .graphs import (
    GraphError,
    Relation,
    SceneGraph,
    graph_distance,
    label_key,
    parse_graph_text,
    serialize_graph_text,
)
from .memory import MemoryStore, Transition
from .prompting import (
    ACTION_SEQUENCE_EXAMPLE,
    AmbiguousDecision,
    ExplorerResponse,
    PromptError,
    PromptTemplate,
    SCENEGRAPH_RELATIONS_TEXT,
    VerifierFeedback,
    action_types_text,
    format_action_history,
    format_graph_history,
    format_transition_history,
    global_objects_text,
    load_template,
    parse_explorer_response,
    parse_verifier_response,
    qna_blocks,
    render_prompt,
)
from .simulator import World
from .skills import SkillError, serialize_skill

MODE_VLM = "vlm"
MODE_GROUND_TRUTH = "ground_truth"
MODE_NOISY = "noisy_ground_truth"


class DescribeFailed(Exception):
    pass


class ExploreFailed(Exception):
    pass


@dataclass
class AgentConfig:
    max_skills: int = 3
    verifier_window: int = 4
    max_verify_retries: int = 2
    describer_mode: str = MODE_VLM
    p_edge_flip: float = 0.0
    noise_drop_ratio: float = 0.5  # flipped edges: dropped vs retyped
    use_memory: bool = True
    use_verifier: bool = True
    describe_fallback_ground_truth: bool = False
    explorer_temperature: float = 0.2
    base_temperature: float = 0.0

    def __post_init__(self):
        if self.max_skills < 1:
            raise ValueError("max_skills must be >= 1")
        if self.verifier_window < 0 or self.max_verify_retries < 0:
            raise ValueError("window and retry budget must be >= 0")


@dataclass
class RejectedStep:
    stage: str  # describe | explore | verify
    reason: str
    tick: int
    verifier_rounds: list[VerifierFeedback] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "reason": self.reason,
            "tick": self.tick,
            "verifier_rounds": [v.to_json() for v in self.verifier_rounds],
        }


StepResult = Union[Transition, RejectedStep]


def perturb_graph(
    g: SceneGraph, p_edge_flip: float, drop_ratio: float, rng: np.random.Generator
) -> SceneGraph:
    """Independently disturb each edge with probability ``p_edge_flip``:
    drop it (with ``drop_ratio``) or retype it between Near and Stacked On.
    Retypes that would give an object two supports fall back to drops."""
    if p_edge_flip <= 0:
        return g
    supports = {label_key(a) for a, r, _b in g.edges if r is Relation.STACKED_ON}
    edges = []
    for a, rel, b in g.edges:
        if float(rng.random()) >= p_edge_flip:
            edges.append((a, rel, b))
            continue
        if float(rng.random()) < drop_ratio:
            continue  # dropped
        if rel is Relation.STACKED_ON:
            edges.append((a, Relation.NEAR, b))
        else:
            subject, target = (a, b) if float(rng.random()) < 0.5 else (b, a)
            if label_key(subject) in supports:
                subject, target = target, subject
            if label_key(subject) in supports:
                continue  # both already supported; drop instead
            supports.add(label_key(subject))
            edges.append((subject, Relation.STACKED_ON, target))
    return SceneGraph.make(g.nodes, edges)


class AgentLoop:
    """Wires describer, explorer, and verifier around one world and one
    memory store. Backends are per-role so ablations can swap just one."""

    def __init__(
        self,
        world: World,
        store: MemoryStore,
        backends: dict[str, Backend],
        cfg: AgentConfig,
        noise_rng: Optional[np.random.Generator] = None,
        templates: Optional[dict[str, PromptTemplate]] = None,
    ):
        self.world = world
        self.store = store
        self.backends = backends
        self.cfg = cfg
        self.catalog = world.catalog()
        self.noise_rng = noise_rng if noise_rng is not None else np.random.default_rng(0)
        self.templates = templates or {
            role: load_template(role) for role in ("describer", "explorer", "verifier")
        }
        self.tick = 0

    # -- describer ---------------------------------------------------------

    def describe(self) -> SceneGraph:
        mode = self.cfg.describer_mode
        if mode == MODE_GROUND_TRUTH:
            return self.world.extract_eval_graph()
        if mode == MODE_NOISY:
            return perturb_graph(
                self.world.extract_eval_graph(),
                self.cfg.p_edge_flip,
                self.cfg.noise_drop_ratio,
                self.noise_rng,
            )
        if mode != MODE_VLM:
            raise ValueError(f"unknown describer mode {mode!r}")

        prompt = render_prompt(
            self.templates["describer"],
            {
                "GLOBAL_OBJECTS_HERE": global_objects_text(self.catalog),
                "QNA_FOR_OBJECT_RELATION": qna_blocks(self.catalog),
            },
        )
        user = prompt + "\n\n## Current Observation\n" + self.world.observation_text()
        last_error: Exception | None = None
        for attempt in range(2):
            text = self.backends["describer"].complete(
                ChatRequest(
                    role="describer",
                    user_text=user,
                    temperature=self.cfg.base_temperature,
                )
            )
            try:
                return parse_graph_text(text, catalog=self.catalog)
            except GraphError as err:
                last_error = err
                user = (
                    user
                    + "\n\n## Format Error\nYour previous reply could not be parsed: "
                    + f"{err}. Reply again, following the output format exactly."
                )
        if self.cfg.describe_fallback_ground_truth:
            return self.world.extract_eval_graph()
        raise DescribeFailed(str(last_error))

    # -- explorer ----------------------------------------------------------

    def _explorer_prompt(self, current: SceneGraph, feedback: Optional[VerifierFeedback]) -> tuple[str, list[SceneGraph]]:
        hits = self.store.retrieve_similar(current) if self.cfg.use_memory else []
        if self.cfg.use_memory:
            recent = self.store.recent_window(self.cfg.verifier_window)
            action_history = [tr.skills for tr in recent]
        else:
            action_history = []
        prompt = render_prompt(
            self.templates["explorer"],
            {
                "NUM_STEPS_HERE": str(self.cfg.max_skills),
                "GLOBAL_OBJECTS_HERE": global_objects_text(self.catalog),
                "ACTION_TYPES": action_types_text(),
                "CURRENT_SCENE_GRAPH": serialize_graph_text(current),
                "SCENEGRAPH_HISTORY": format_graph_history(hits),
                "ACTION_HISTORY": format_action_history(action_history),
                "ACTION_SEQUENCE_EXAMPLE": ACTION_SEQUENCE_EXAMPLE,
                "SCENEGRAPH_RELATIONS": SCENEGRAPH_RELATIONS_TEXT,
            },
        )
        user = prompt + "\n\n## Current Observation\n" + self.world.observation_text()
        if feedback is not None:
            user += (
                "\n\n## Verifier Feedback On Your Previous Plan\n"
                + feedback.reason
                + "\nRevise the plan to address this."
            )
        return user, hits

    def explore(
        self, current: SceneGraph, feedback: Optional[VerifierFeedback] = None
    ) -> ExplorerResponse:
        user, hits = self._explorer_prompt(current, feedback)
        resp = self._explore_once(current, hits, user)
        if graph_distance(resp.desired_graph, current) > 0:
            return resp
        # one retry demanding a configuration that actually differs
        retry_user = (
            user
            + "\n\nYour previous desired scene graph was identical to the current "
            "scene graph. Propose a configuration that differs."
        )
        resp = self._explore_once(current, hits, retry_user)
        if graph_distance(resp.desired_graph, current) > 0:
            return resp
        raise ExploreFailed("desired graph equals the current graph after a retry")

    def _explore_once(self, current, hits, user) -> ExplorerResponse:
        visited = self.store.unique_graphs() if self.cfg.use_memory else []
        text = self.backends["explorer"].complete(
            ChatRequest(
                role="explorer",
                user_text=user,
                temperature=self.cfg.explorer_temperature,
                context=explore_context(
                    current, hits, self.cfg.max_skills, visited=visited
                ),
            )
        )
        return parse_explorer_response(text, self.catalog, self.cfg.max_skills)

    # -- verifier ------------------------------------------------------------

    def verify(self, plan: ExplorerResponse, current: SceneGraph) -> VerifierFeedback:
        window = (
            self.store.recent_window(self.cfg.verifier_window)
            if self.cfg.use_memory
            else []
        )
        prompt = render_prompt(
            self.templates["verifier"],
            {
                "ACTION_TYPES": action_types_text(),
                "TRANSITION_HISTORY": format_transition_history(
                    window, self.cfg.verifier_window
                ),
            },
        )
        user = (
            prompt
            + "\n\n## Current Scene Graph\n"
            + serialize_graph_text(current)
            + "\n\n## Desired Scene Graph\n"
            + serialize_graph_text(plan.desired_graph)
            + "\n\n## Proposed Action Sequence\n"
            + "\n".join(serialize_skill(s) for s in plan.skills)
        )
        text = self.backends["verifier"].complete(
            ChatRequest(
                role="verifier",
                user_text=user,
                temperature=self.cfg.base_temperature,
                context=skills_context(plan.skills, plan.desired_graph),
            )
        )
        try:
            return parse_verifier_response(text)
        except AmbiguousDecision:
            return VerifierFeedback(decision=False, reason="unparseable decision")

    # -- the cycle -----------------------------------------------------------

    def step(self) -> StepResult:
        """Run one imagine / verify / execute cycle.

        Returns the recorded Transition, or a RejectedStep if describing,
        planning, or verification ruled the step out; rejected steps do not
        touch the store.
        """
        tick = self.tick
        self.tick += 1
        try:
            before = self.describe()
        except DescribeFailed as err:
            return RejectedStep(stage="describe", reason=str(err), tick=tick)
        eval_before = self.world.extract_eval_graph()

        try:
            plan = self.explore(before)
        except (ExploreFailed, GraphError, SkillError, PromptError) as err:
            return RejectedStep(stage="explore", reason=str(err), tick=tick)

        rounds: list[VerifierFeedback] = []
        if self.cfg.use_verifier:
            for attempt in range(self.cfg.max_verify_retries + 1):
                fb = self.verify(plan, before)
                rounds.append(fb)
                if fb.decision:
                    break
                if attempt < self.cfg.max_verify_retries:
                    try:
                        plan = self.explore(before, feedback=fb)
                    except (ExploreFailed, GraphError, SkillError, PromptError) as err:
                        return RejectedStep(
                            stage="explore",
                            reason=f"replan failed: {err}",
                            tick=tick,
                            verifier_rounds=rounds,
                        )
            if not rounds[-1].decision:
                return RejectedStep(
                    stage="verify",
                    reason=rounds[-1].reason,
                    tick=tick,
                    verifier_rounds=rounds,
                )

        outcomes = [self.world.execute_skill(s).to_json() for s in plan.skills]

        try:
            after = self.describe()
        except DescribeFailed:
            # the world already changed, so the transition must be recorded;
            # fall back to ground truth rather than lose it
            after = self.world.extract_eval_graph()
        eval_after = self.world.extract_eval_graph()

        tr = Transition(
            index=len(self.store.transitions),
            before=before,
            skills=plan.skills,
            after=after,
            outcomes=outcomes,
            verifier_rounds=rounds,
            eval_before=eval_before,
            eval_after=eval_after,
            desired=plan.desired_graph,
            tick=tick,
        )
        self.store.record(tr)
        return tr
