"""The skill command grammar shared by the planner output, the verifier
input, the simulator, and the operator console.

Three forms, parsed and emitted as single lines:

    move(obj_a, RELATION, obj_b)    relation move
    move(obj_a, B3)                 grid move
    arrange(obj_a)                  clear-area arrangement

Canonical serialized strings double as the action identifiers used by the
exploration metrics, so serialization must stay stable across runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .graphs import PLACEMENT_RELATIONS, Relation, label_key, match_relation, normalize_label
from .grid import GridCell, InvalidGridId, parse_cell

RELATION_MOVE = "relation_move"
GRID_MOVE = "grid_move"
ARRANGE = "arrange"


class SkillError(Exception):
    """Base class for skill grammar failures."""


class UnknownForm(SkillError):
    """Line does not match any of the three command forms."""


class UnknownObject(SkillError):
    def __init__(self, name: str):
        super().__init__(f"unknown object: {name!r}")
        self.name = name


@dataclass(frozen=True)
class SkillCommand:
    kind: str
    subject: str
    relation: Optional[Relation] = None
    target: Optional[str] = None
    cell: Optional[GridCell] = None

    def __post_init__(self):
        if self.kind == RELATION_MOVE:
            if self.relation not in PLACEMENT_RELATIONS or not self.target:
                raise UnknownForm(f"bad relation move: {self}")
            if label_key(self.subject) == label_key(self.target):
                raise UnknownForm(f"subject equals target: {self.subject!r}")
        elif self.kind == GRID_MOVE:
            if self.cell is None:
                raise UnknownForm("grid move without a cell")
        elif self.kind != ARRANGE:
            raise UnknownForm(f"unknown skill kind: {self.kind!r}")


def relation_move(subject: str, relation: Relation, target: str) -> SkillCommand:
    return SkillCommand(RELATION_MOVE, normalize_label(subject), relation, normalize_label(target))


def grid_move(subject: str, cell: GridCell | str) -> SkillCommand:
    if isinstance(cell, str):
        cell = parse_cell(cell)
    return SkillCommand(GRID_MOVE, normalize_label(subject), cell=cell)


def arrange(subject: str) -> SkillCommand:
    return SkillCommand(ARRANGE, normalize_label(subject))


_LINE_RE = re.compile(r"^\s*(move|arrange)\s*\((.*)\)\s*[.;]?\s*$", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*(?:[-*•>]+|\d+[.)])\s*")
_CELLISH_RE = re.compile(r"^[A-Za-z]\d{1,2}$")


def strip_list_prefix(line: str) -> str:
    """Drop leading bullets or numbering; planners sometimes add them."""
    return _BULLET_RE.sub("", line).strip()


def parse_skill(line: str, catalog: Iterable[str]) -> SkillCommand:
    """Parse one command line, resolving object names against the catalog.

    Object matching is case-insensitive and returns the catalog spelling.
    Unknown objects are hard errors: there is no way to recover a command
    aimed at a thing that does not exist.
    """
    cat = {label_key(c): normalize_label(c) for c in catalog}

    def resolve(raw: str) -> str:
        name = normalize_label(raw)
        hit = cat.get(label_key(name))
        if hit is None:
            raise UnknownObject(name)
        return hit

    m = _LINE_RE.match(strip_list_prefix(line))
    if not m:
        raise UnknownForm(f"unrecognized command line: {line.strip()!r}")
    verb, arg_text = m.group(1).lower(), m.group(2)
    args = [a.strip() for a in arg_text.split(",")]

    if verb == "arrange":
        if len(args) != 1 or not args[0]:
            raise UnknownForm(f"arrange takes one object: {line.strip()!r}")
        return arrange(resolve(args[0]))

    if len(args) == 2:
        subject, cell_id = args
        if not _CELLISH_RE.match(cell_id):
            raise InvalidGridId(cell_id)
        return grid_move(resolve(subject), parse_cell(cell_id))
    if len(args) == 3:
        subject, rel_name, target = args
        rel = match_relation(rel_name, PLACEMENT_RELATIONS)
        subject, target = resolve(subject), resolve(target)
        if label_key(subject) == label_key(target):
            raise UnknownForm(f"subject equals target: {subject!r}")
        return SkillCommand(RELATION_MOVE, subject, rel, target)
    raise UnknownForm(f"move takes 2 or 3 arguments: {line.strip()!r}")


def serialize_skill(cmd: SkillCommand) -> str:
    if cmd.kind == RELATION_MOVE:
        return f"move({cmd.subject}, {cmd.relation.value}, {cmd.target})"
    if cmd.kind == GRID_MOVE:
        return f"move({cmd.subject}, {cmd.cell.ident})"
    return f"arrange({cmd.subject})"


def serialize_sequence(cmds: Iterable[SkillCommand]) -> str:
    """Stable one-line identifier for a whole skill sequence."""
    return "; ".join(serialize_skill(c) for c in cmds)


def skill_to_json(cmd: SkillCommand) -> dict:
    if cmd.kind == RELATION_MOVE:
        return {
            "kind": RELATION_MOVE,
            "subject": cmd.subject,
            "relation": cmd.relation.value,
            "target": cmd.target,
        }
    if cmd.kind == GRID_MOVE:
        return {"kind": GRID_MOVE, "subject": cmd.subject, "cell": cmd.cell.ident}
    return {"kind": ARRANGE, "subject": cmd.subject}


def skill_from_json(data: dict) -> SkillCommand:
    kind = data["kind"]
    if kind == RELATION_MOVE:
        return SkillCommand(
            RELATION_MOVE,
            normalize_label(data["subject"]),
            match_relation(data["relation"], PLACEMENT_RELATIONS),
            normalize_label(data["target"]),
        )
    if kind == GRID_MOVE:
        return grid_move(data["subject"], data["cell"])
    if kind == ARRANGE:
        return arrange(data["subject"])
    raise UnknownForm(f"unknown skill kind in record: {kind!r}")
