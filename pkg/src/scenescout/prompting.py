"""Prompt templates and response parsing for the three agent roles.

Templates are plain text files with ``<PLACEHOLDER>`` tokens from a fixed
vocabulary; packaged defaults live under ``scenescout/templates`` and can be
overridden by path so prompts are editable without touching code. Responses
come back as marker-delimited sections (``<start_decision>`` etc.) which this
module parses into typed values; a parse either fully succeeds or raises a
typed error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .graphs import (
    END_DESIRED_GRAPH,
    MissingMarkers,
    SceneGraph,
    START_DESIRED_GRAPH,
    label_key,
    parse_graph_text,
    serialize_graph_text,
)
from .skills import SkillCommand, UnknownObject, parse_skill, serialize_sequence, strip_list_prefix

DESCRIBER = "describer"
EXPLORER = "explorer"
VERIFIER = "verifier"

PLACEHOLDERS = frozenset(
    {
        "GLOBAL_OBJECTS_HERE",
        "NUM_STEPS_HERE",
        "CURRENT_SCENE_GRAPH",
        "SCENEGRAPH_HISTORY",
        "ACTION_HISTORY",
        "TRANSITION_HISTORY",
        "ACTION_TYPES",
        "ACTION_SEQUENCE_EXAMPLE",
        "QNA_FOR_OBJECT_RELATION",
        "SCENEGRAPH_RELATIONS",
    }
)

START_SCRATCH = "<start_scratch_pad>"
END_SCRATCH = "<end_scratch_pad>"
START_ACTIONS = "<start_action_sequence>"
END_ACTIONS = "<end_action_sequence>"
START_DECISION = "<start_decision>"
END_DECISION = "<end_decision>"
START_REASON = "<start_reason>"
END_REASON = "<end_reason>"

EMPTY_HISTORY = "(no prior transitions)"

SCENEGRAPH_RELATIONS_TEXT = "[Stacked On, Near]"

ACTION_SEQUENCE_EXAMPLE = (
    "move(white cup, Stacked On, red plate)\n"
    "move(blue ball, B3)\n"
    "arrange(red block)"
)


class PromptError(Exception):
    pass


class MissingPlaceholderValue(PromptError):
    def __init__(self, name: str):
        super().__init__(f"no value supplied for placeholder <{name}>")
        self.name = name


class EmptyActionSequence(PromptError):
    pass


class AmbiguousDecision(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    role: str
    body: str

    def placeholders(self) -> set[str]:
        return {name for name in PLACEHOLDERS if f"<{name}>" in self.body}


def load_template(role: str, path: Optional[Path] = None) -> PromptTemplate:
    """Load a template for a role, from ``path`` or the packaged default."""
    if path is not None:
        body = Path(path).read_text(encoding="utf-8")
    else:
        body = (resources.files("scenescout") / "templates" / f"{role}.txt").read_text(
            encoding="utf-8"
        )
    return PromptTemplate(role=role, body=body)


def action_types_text() -> str:
    return (resources.files("scenescout") / "templates" / "action_types.txt").read_text(
        encoding="utf-8"
    )


_TOKEN_RE = re.compile("<(" + "|".join(sorted(PLACEHOLDERS)) + ")>")


def render_prompt(template: PromptTemplate, ctx: Mapping[str, str]) -> str:
    """Substitute placeholder tokens in a single pass.

    Every vocabulary token present in the body must have a value in ``ctx``;
    tokens outside the vocabulary (markers, example triples) pass through
    untouched, and substituted values are never re-scanned.
    """
    missing = [name for name in template.placeholders() if name not in ctx]
    if missing:
        raise MissingPlaceholderValue(sorted(missing)[0])
    return _TOKEN_RE.sub(lambda m: ctx[m.group(1)], template.body)


@dataclass
class ExplorerResponse:
    scratch_pad: str
    desired_graph: SceneGraph
    skills: list[SkillCommand]
    warnings: list[str] = field(default_factory=list)


@dataclass
class VerifierFeedback:
    decision: bool
    reason: str = ""
    scratch_pad: str = ""

    def to_json(self) -> dict:
        return {"decision": self.decision, "reason": self.reason}

    @staticmethod
    def from_json(data: dict) -> "VerifierFeedback":
        return VerifierFeedback(decision=bool(data["decision"]), reason=data.get("reason", ""))


def _optional_section(text: str, start: str, end: str, warnings: list[str]) -> str:
    from .graphs import _find_section

    try:
        content, pairs = _find_section(text, start, end)
    except MissingMarkers:
        return ""
    if pairs > 1:
        warnings.append(f"multiple {start} sections; using the last of {pairs}")
    return content.strip()


def _required_section(text: str, start: str, end: str, warnings: list[str]) -> str:
    from .graphs import _find_section

    content, pairs = _find_section(text, start, end)
    if pairs > 1:
        warnings.append(f"multiple {start} sections; using the last of {pairs}")
    return content


def parse_explorer_response(
    text: str, catalog: Sequence[str], max_skills: int
) -> ExplorerResponse:
    """Parse a planner response: scratch pad, desired graph, skill lines.

    The desired graph must only name catalog objects. Extra skills beyond
    ``max_skills`` are dropped with a warning; parse failures on individual
    lines propagate with the offending line number attached.
    """
    warnings: list[str] = []
    scratch = _optional_section(text, START_SCRATCH, END_SCRATCH, warnings)

    graph_warnings: list[str] = []
    desired = parse_graph_text(
        text,
        markers=(START_DESIRED_GRAPH, END_DESIRED_GRAPH),
        catalog=catalog,
        warnings=graph_warnings,
    )
    catalog_keys = {label_key(c) for c in catalog}
    for node in desired.nodes:
        if label_key(node) not in catalog_keys:
            raise UnknownObject(node)
    warnings.extend(graph_warnings)

    actions_body = _required_section(text, START_ACTIONS, END_ACTIONS, warnings)
    skills: list[SkillCommand] = []
    for lineno, raw in enumerate(actions_body.strip("\n").splitlines(), start=1):
        line = strip_list_prefix(raw)
        if not line:
            continue
        try:
            skills.append(parse_skill(line, catalog))
        except Exception as err:
            err.args = (f"action line {lineno}: {err}",)
            raise
    if not skills:
        raise EmptyActionSequence("no action lines between the action-sequence markers")
    if len(skills) > max_skills:
        warnings.append(f"{len(skills)} actions emitted; truncated to first {max_skills}")
        skills = skills[:max_skills]
    return ExplorerResponse(
        scratch_pad=scratch, desired_graph=desired, skills=skills, warnings=warnings
    )


def parse_verifier_response(text: str) -> VerifierFeedback:
    """Parse the YES/NO decision and the reason text.

    The decision is the first alphabetic token of the decision section,
    case-insensitive; anything else is an AmbiguousDecision error so callers
    can apply their own fail-safe.
    """
    warnings: list[str] = []
    decision_body = _required_section(text, START_DECISION, END_DECISION, warnings)
    token_match = re.search(r"[A-Za-z]+", decision_body)
    token = token_match.group(0).casefold() if token_match else ""
    if token not in ("yes", "no"):
        raise AmbiguousDecision(f"decision token {token!r} is neither yes nor no")
    decision = token == "yes"
    reason = _optional_section(text, START_REASON, END_REASON, warnings)
    scratch = _optional_section(text, START_SCRATCH, END_SCRATCH, warnings)
    if not decision and not reason:
        reason = "(no reason given)"
    return VerifierFeedback(decision=decision, reason=reason, scratch_pad=scratch)


def format_transition_history(transitions: Sequence, window: int) -> str:
    """Render the most recent ``window`` transitions, oldest first, as
    alternating scene-graph blocks and action lines."""
    if window < 0:
        raise ValueError("window must be >= 0")
    recent = list(transitions)[-window:] if window else []
    if not recent:
        return EMPTY_HISTORY
    parts = []
    for tr in recent:
        parts.append(
            "Scene Graph:\n"
            + serialize_graph_text(tr.before)
            + "\nAction: "
            + serialize_sequence(tr.skills)
            + "\nScene Graph:\n"
            + serialize_graph_text(tr.after)
        )
    return "\n\n".join(parts)


def format_graph_history(graphs: Sequence[SceneGraph]) -> str:
    if not graphs:
        return EMPTY_HISTORY
    blocks = [
        f"Visited scene {i}:\n{serialize_graph_text(g)}"
        for i, g in enumerate(graphs, start=1)
    ]
    return "\n\n".join(blocks)


def format_action_history(sequences: Sequence[Sequence[SkillCommand]]) -> str:
    if not sequences:
        return EMPTY_HISTORY
    return "\n".join(
        f"step {i}: {serialize_sequence(seq)}" for i, seq in enumerate(sequences, start=1)
    )


def qna_blocks(catalog: Iterable[str]) -> str:
    """One question block per catalog object; the model writes the answers."""
    blocks = []
    for i, name in enumerate(catalog, start=1):
        blocks.append(
            f"Object {i}: {name}\n"
            "--------------------------------\n"
            f"What are the closest 0~3 objects from {name}? "
            f"What are their relations from {name}'s perspective?\n"
            "Answer:\n"
            "--------------------------------"
        )
    return "\n".join(blocks)


def global_objects_text(catalog: Iterable[str]) -> str:
    return ", ".join(catalog)
