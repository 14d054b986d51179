"""Scene graphs: symbolic tabletop state as named objects plus typed spatial relations.

A graph is a set of object nodes and a set of relation edges. ``Stacked On``
is directed (subject rests on support); ``Near`` is undirected and stored
with its endpoints in a fixed order. Graphs are canonical by construction:
nodes and edges are sorted, names are whitespace-normalized, and identity is
case-insensitive, so two graphs describing the same arrangement compare equal
regardless of how they were written down.

The module also owns the text grammar used on the wire (``<start_graph>`` /
``<end_graph>`` blocks with ``Nodes:`` and ``Relations:`` lines) and the
edit distance used for memory retrieval and novelty metrics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence


class Relation(Enum):
    """Spatial relation vocabulary.

    Graph edges use only STACKED_ON and NEAR; the remaining members are
    placement relations that appear in move commands.
    """

    STACKED_ON = "Stacked On"
    NEAR = "Near"
    IN_FRONT_OF = "In Front Of"
    BEHIND = "Behind"
    TO_LEFT_OF = "To The Left Of"
    TO_RIGHT_OF = "To The Right Of"


GRAPH_RELATIONS = frozenset({Relation.STACKED_ON, Relation.NEAR})

PLACEMENT_RELATIONS = (
    Relation.IN_FRONT_OF,
    Relation.BEHIND,
    Relation.TO_LEFT_OF,
    Relation.TO_RIGHT_OF,
    Relation.STACKED_ON,
)

# Tolerant lookup: letters only, lowercased, optional "the".
_RELATION_ALIASES = {
    "stackedon": Relation.STACKED_ON,
    "near": Relation.NEAR,
    "infrontof": Relation.IN_FRONT_OF,
    "behind": Relation.BEHIND,
    "totheleftof": Relation.TO_LEFT_OF,
    "toleftof": Relation.TO_LEFT_OF,
    "leftof": Relation.TO_LEFT_OF,
    "totherightof": Relation.TO_RIGHT_OF,
    "torightof": Relation.TO_RIGHT_OF,
    "rightof": Relation.TO_RIGHT_OF,
}

START_GRAPH = "<start_graph>"
END_GRAPH = "<end_graph>"
START_DESIRED_GRAPH = "<start_desired_scene_graph>"
END_DESIRED_GRAPH = "<end_desired_scene_graph>"


class GraphError(Exception):
    """Base class for scene-graph construction and parsing failures."""


class GraphInvariantError(GraphError):
    """A candidate graph violates a structural invariant."""


class MissingMarkers(GraphError):
    """Graph text lacks a matching start/end marker pair."""


class UnknownRelation(GraphError):
    """A relation name outside the allowed vocabulary."""

    def __init__(self, name: str):
        super().__init__(f"unknown relation: {name!r}")
        self.name = name


class MalformedTriple(GraphError):
    """A relation entry that cannot be read as <a, REL, b>."""


def normalize_label(label: str) -> str:
    """Trim and collapse internal whitespace, preserving case."""
    return re.sub(r"\s+", " ", label).strip()


def label_key(label: str) -> str:
    """Case-insensitive identity key for an object name."""
    return normalize_label(label).casefold()


def match_relation(name: str, allowed: Iterable[Relation] = GRAPH_RELATIONS) -> Relation:
    """Resolve a relation name case- and spacing-insensitively.

    Raises UnknownRelation if the name resolves to nothing or to a relation
    outside ``allowed``.
    """
    key = re.sub(r"[^a-z]", "", name.casefold())
    rel = _RELATION_ALIASES.get(key)
    if rel is None or rel not in set(allowed):
        raise UnknownRelation(name)
    return rel


Edge = tuple[str, Relation, str]


@dataclass(frozen=True, eq=False)
class SceneGraph:
    """Canonical scene graph. Build through :meth:`make`, not the constructor.

    ``nodes`` and ``edges`` are sorted tuples; Near edges store endpoints in
    key order. Equality and hashing are case-insensitive on node and edge
    content, so graphs work directly as dict keys for visit counting.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    @staticmethod
    def make(
        nodes: Iterable[str],
        edges: Iterable[tuple[str, Relation | str, str]] = (),
    ) -> "SceneGraph":
        by_key: dict[str, str] = {}
        for raw in nodes:
            name = normalize_label(raw)
            if not name:
                raise GraphInvariantError("empty object name")
            by_key.setdefault(label_key(name), name)

        seen_pairs: dict[frozenset[str], Edge] = {}
        supports: dict[str, str] = {}
        out_edges: list[Edge] = []
        for a_raw, rel_raw, b_raw in edges:
            rel = rel_raw if isinstance(rel_raw, Relation) else match_relation(rel_raw)
            if rel not in GRAPH_RELATIONS:
                raise UnknownRelation(rel.value)
            ka, kb = label_key(a_raw), label_key(b_raw)
            if ka not in by_key or kb not in by_key:
                missing = a_raw if ka not in by_key else b_raw
                raise GraphInvariantError(f"edge endpoint not in nodes: {missing!r}")
            if ka == kb:
                raise GraphInvariantError(f"self-edge on {a_raw!r}")
            pair = frozenset((ka, kb))
            if pair in seen_pairs:
                prior = seen_pairs[pair]
                if _edge_key(prior) == _edge_key((by_key[ka], rel, by_key[kb])):
                    continue  # exact duplicate
                raise GraphInvariantError(
                    f"conflicting relations for pair ({by_key[ka]!r}, {by_key[kb]!r})"
                )
            if rel is Relation.STACKED_ON:
                if ka in supports:
                    raise GraphInvariantError(f"{by_key[ka]!r} stacked on two supports")
                supports[ka] = kb
                edge: Edge = (by_key[ka], rel, by_key[kb])
            else:
                lo, hi = sorted((ka, kb))
                edge = (by_key[lo], rel, by_key[hi])
            seen_pairs[pair] = edge
            out_edges.append(edge)

        ordered_nodes = tuple(sorted(by_key.values(), key=label_key))
        ordered_edges = tuple(sorted(out_edges, key=_edge_key))
        return SceneGraph(nodes=ordered_nodes, edges=ordered_edges)

    def node_keys(self) -> frozenset[str]:
        return frozenset(label_key(n) for n in self.nodes)

    def edge_keys(self) -> frozenset[tuple[str, str, str]]:
        return frozenset(_edge_key(e) for e in self.edges)

    def canonical_key(self) -> str:
        """Byte-stable identity string; equal graphs share it exactly."""
        return json.dumps(
            {
                "nodes": sorted(self.node_keys()),
                "edges": sorted(self.edge_keys()),
            },
            separators=(",", ":"),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SceneGraph):
            return NotImplemented
        return self.node_keys() == other.node_keys() and self.edge_keys() == other.edge_keys()

    def __hash__(self) -> int:
        return hash((self.node_keys(), self.edge_keys()))

    def __repr__(self) -> str:
        return f"SceneGraph(nodes={list(self.nodes)!r}, edges={len(self.edges)})"


def _edge_key(edge: tuple[str, Relation, str]) -> tuple[str, str, str]:
    a, rel, b = edge
    return (label_key(a), rel.value.casefold(), label_key(b))


EMPTY_GRAPH = SceneGraph.make([])


def canonicalize(g: SceneGraph) -> SceneGraph:
    """Rebuild a graph in canonical form. Idempotent; graphs made through
    :meth:`SceneGraph.make` are already canonical."""
    return SceneGraph.make(g.nodes, g.edges)


def graph_distance(a: SceneGraph, b: SceneGraph) -> int:
    """Edit distance between two graphs: size of the node-set symmetric
    difference plus the edge-set symmetric difference.

    Because object names are unique within a graph, node correspondence is
    fixed by name and this count is the exact minimum edit script (insert /
    delete nodes and edges; a retype costs one delete plus one insert).
    """
    return len(a.node_keys() ^ b.node_keys()) + len(a.edge_keys() ^ b.edge_keys())


_TRIPLE_RE = re.compile(r"<([^<>]*)>")


def _find_section(text: str, start: str, end: str) -> tuple[str, int]:
    """Return (content of last start/end pair, number of pairs found)."""
    spans = []
    pos = 0
    while True:
        i = text.find(start, pos)
        if i < 0:
            break
        j = text.find(end, i + len(start))
        if j < 0:
            raise MissingMarkers(f"unterminated {start} section")
        spans.append(text[i + len(start) : j])
        pos = j + len(end)
    if not spans:
        raise MissingMarkers(f"no {start} ... {end} section found")
    return spans[-1], len(spans)


def parse_graph_text(
    text: str,
    markers: tuple[str, str] = (START_GRAPH, END_GRAPH),
    catalog: Optional[Sequence[str]] = None,
    warnings: Optional[list[str]] = None,
) -> SceneGraph:
    """Parse a marker-delimited graph block into a canonical SceneGraph.

    Accepts ``Nodes:`` as a comma-separated name list and ``Relations:`` as
    angle-bracket triples ``<a, REL, b>``. Relation names match
    case-insensitively; a comma missing after the relation name is tolerated.
    An edge endpoint that is not listed under Nodes is added to the graph
    with a warning rather than rejected, since model output is noisy. When a
    catalog is given, names are re-spelled to their catalog form.

    If more than one marker pair is present the last one wins (models often
    restate the format while reasoning); this too is recorded as a warning.
    """
    sink = warnings if warnings is not None else []
    start, end = markers
    body, pairs = _find_section(text, start, end)
    if pairs > 1:
        sink.append(f"multiple {start} sections; using the last of {pairs}")

    cat_by_key = {label_key(c): normalize_label(c) for c in catalog} if catalog else {}

    def resolve(raw: str) -> str:
        name = normalize_label(raw)
        if cat_by_key:
            hit = cat_by_key.get(label_key(name))
            if hit is not None:
                return hit
            sink.append(f"object not in catalog: {name!r}")
        return name

    nodes_match = re.search(r"^\s*Nodes\s*:(.*)$", body, re.IGNORECASE | re.MULTILINE)
    if nodes_match is None:
        raise MalformedTriple("missing 'Nodes:' line")
    nodes = [resolve(n) for n in nodes_match.group(1).split(",") if n.strip()]

    rel_match = re.search(r"Relations\s*:", body, re.IGNORECASE)
    edges: list[tuple[str, Relation, str]] = []
    if rel_match is not None:
        rel_body = body[rel_match.end() :]
        for triple in _TRIPLE_RE.findall(rel_body):
            edges.append(_parse_triple(triple, resolve))

    node_keys = {label_key(n) for n in nodes}
    for a, _rel, b in edges:
        for endpoint in (a, b):
            if label_key(endpoint) not in node_keys:
                sink.append(f"edge references unlisted node {endpoint!r}; added")
                nodes.append(endpoint)
                node_keys.add(label_key(endpoint))

    deduped: list[tuple[str, Relation, str]] = []
    pair_seen: dict[frozenset[str], tuple[str, str, str]] = {}
    support_seen: set[str] = set()
    for a, rel, b in edges:
        pair = frozenset((label_key(a), label_key(b)))
        ek = _edge_key((a, rel, b))
        if pair in pair_seen:
            if pair_seen[pair] != ek:
                sink.append(f"conflicting relation for ({a!r}, {b!r}); keeping first")
            continue
        if rel is Relation.STACKED_ON:
            if label_key(a) in support_seen:
                sink.append(f"{a!r} stacked on more than one support; keeping first")
                continue
            support_seen.add(label_key(a))
        pair_seen[pair] = ek
        deduped.append((a, rel, b))

    return SceneGraph.make(nodes, deduped)


def _parse_triple(content: str, resolve) -> tuple[str, Relation, str]:
    parts = [p.strip() for p in content.split(",")]
    if len(parts) == 3 and all(parts):
        a, rel_name, b = parts
        return resolve(a), match_relation(rel_name), resolve(b)
    # Tolerate a missing comma after the relation name ("<a, Near b>").
    if len(parts) == 2 and all(parts):
        a, rest = parts
        for alias, rel in _RELATION_ALIASES.items():
            if rel not in GRAPH_RELATIONS:
                continue
            m = re.match(rf"({_alias_pattern(alias)})\s+(\S.*)$", rest, re.IGNORECASE)
            if m:
                return resolve(a), rel, resolve(m.group(2))
        raise MalformedTriple(f"cannot split relation entry: <{content}>")
    raise MalformedTriple(f"expected <a, REL, b>, got: <{content}>")


def _alias_pattern(alias: str) -> str:
    # "stackedon" -> "stacked\s*on" so spaced spellings match.
    known = {"stackedon": r"stacked\s*on", "near": r"near"}
    return known.get(alias, alias)


def serialize_graph_text(
    g: SceneGraph, markers: tuple[str, str] = (START_GRAPH, END_GRAPH)
) -> str:
    """Emit the marker-delimited text form, in canonical order."""
    start, end = markers
    nodes_line = "Nodes: " + ", ".join(g.nodes) if g.nodes else "Nodes:"
    triples = ", ".join(f"<{a}, {rel.value}, {b}>" for a, rel, b in g.edges)
    rel_line = "Relations: " + triples if triples else "Relations:"
    return f"{start}\n{nodes_line}\n{rel_line}\n{end}"


def graph_to_json(g: SceneGraph) -> dict:
    """Canonical JSON encoding used in logs and over HTTP."""
    return {
        "nodes": list(g.nodes),
        "edges": [[a, rel.value, b] for a, rel, b in g.edges],
    }


def graph_from_json(data: dict) -> SceneGraph:
    return SceneGraph.make(
        data.get("nodes", []),
        [(a, match_relation(rel), b) for a, rel, b in data.get("edges", [])],
    )
