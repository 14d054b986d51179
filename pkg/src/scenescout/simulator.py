"""Deterministic seeded tabletop world: poses, stacks, placement geometry,
skill execution with failure dynamics, ground-truth graph extraction, and
rendering.

The world is 2.5-D: objects have continuous (x, y) table coordinates and an
integer stack level; support links form a forest. Physics is symbolic -
relation placements use fixed center offsets (0.08 m), stacking lands on the
top of the target's stack, and manipulating an object with anything on top
of it topples the part of the stack above. All randomness (arrangement
sampling, failure draws, scatter tie-breaks) flows through one seeded
generator, so a seed plus a skill sequence fully determines the final state.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graphs import Relation, SceneGraph, label_key, normalize_label
from .grid import DEFAULT_BOUNDS, GridCell, Rect, all_cells, cell_center
from .skills import ARRANGE, GRID_MOVE, RELATION_MOVE, SkillCommand

RELATION_OFFSET = 0.08  # planar center offset for directional placements, meters
DROP_HEIGHT_OFFSET = 0.01  # descent clearance above a stack, logged not simulated
GRASP_CLEARANCE = 0.1  # lift height recorded in low-level action logs
GRASP_Z_OFFSET = -0.048  # grasp descent offset recorded in low-level action logs

DEFAULT_H_MAX = 3
DEFAULT_D_NEAR = 0.04
DEFAULT_EPS_OVERLAP = 0.005
DEFAULT_ARRANGE_MARGIN = 0.01
DEFAULT_RADIUS = 0.03


class SimError(Exception):
    pass


class UnknownObjectError(SimError):
    def __init__(self, name: str):
        super().__init__(f"no such object in the world: {name!r}")
        self.name = name


class TargetStackFull(SimError):
    pass


class OutOfBoundsError(SimError):
    pass


class NoFreeSpace(SimError):
    pass


class Status(Enum):
    SUCCESS = "Success"
    GRASP_FAILED = "GraspFailed"
    TOPPLED = "Toppled"
    OUT_OF_BOUNDS = "OutOfBounds"
    BLOCKED = "Blocked"


@dataclass(frozen=True)
class Footprint:
    """Disc (radius) or convex polygon (local vertices, meters)."""

    radius: Optional[float] = None
    polygon: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self):
        if (self.radius is None) == (self.polygon is None):
            raise ValueError("footprint must be a radius or a polygon, not both")

    @property
    def bound(self) -> float:
        """Circumscribing radius, used for bounds insets."""
        if self.radius is not None:
            return self.radius
        return max(math.hypot(x, y) for x, y in self.polygon)

    def to_json(self) -> dict:
        if self.radius is not None:
            return {"radius": self.radius}
        return {"polygon": [list(v) for v in self.polygon]}

    @staticmethod
    def from_json(data: dict) -> "Footprint":
        if "polygon" in data:
            return Footprint(polygon=tuple((float(x), float(y)) for x, y in data["polygon"]))
        return Footprint(radius=float(data.get("radius", DEFAULT_RADIUS)))


@dataclass
class ObjPose:
    x: float
    y: float
    z_level: int = 0
    support: Optional[str] = None
    footprint: Footprint = field(default_factory=lambda: Footprint(radius=DEFAULT_RADIUS))
    yaw: float = 0.0

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "z_level": self.z_level,
            "support": self.support,
            "footprint": self.footprint.to_json(),
            "yaw": self.yaw,
        }

    @staticmethod
    def from_json(data: dict) -> "ObjPose":
        return ObjPose(
            x=float(data["x"]),
            y=float(data["y"]),
            z_level=int(data.get("z_level", 0)),
            support=data.get("support"),
            footprint=Footprint.from_json(data.get("footprint", {})),
            yaw=float(data.get("yaw", 0.0)),
        )


@dataclass
class ExecutionOutcome:
    status: Status
    moved: list[tuple[str, ObjPose, ObjPose]] = field(default_factory=list)
    note: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "moved": [
                {"name": name, "old": old.to_json(), "new": new.to_json()}
                for name, old, new in self.moved
            ],
            "note": self.note,
        }


def world_polygon(pose: ObjPose) -> list[tuple[float, float]]:
    """Polygon footprint vertices in world coordinates."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return [
        (pose.x + c * vx - s * vy, pose.y + s * vx + c * vy)
        for vx, vy in pose.footprint.polygon
    ]


def footprint_gap(a: ObjPose, b: ObjPose) -> float:
    """Clearance between two footprints; negative means penetration depth
    for discs, and any polygon overlap reports as -inf."""
    if a.footprint.radius is not None and b.footprint.radius is not None:
        d = math.hypot(a.x - b.x, a.y - b.y)
        return d - a.footprint.radius - b.footprint.radius
    from shapely.geometry import Point, Polygon

    ga = (
        Point(a.x, a.y).buffer(a.footprint.radius, quad_segs=16)
        if a.footprint.radius is not None
        else Polygon(world_polygon(a))
    )
    gb = (
        Point(b.x, b.y).buffer(b.footprint.radius, quad_segs=16)
        if b.footprint.radius is not None
        else Polygon(world_polygon(b))
    )
    gap = ga.distance(gb)
    if gap == 0.0 and ga.intersection(gb).area > 1e-12:
        return float("-inf")
    return gap


class World:
    """Mutable simulator state, owned by exactly one run loop."""

    def __init__(
        self,
        objects: dict[str, ObjPose],
        bounds: Rect = DEFAULT_BOUNDS,
        seed: int = 0,
        h_max: int = DEFAULT_H_MAX,
        p_fail: float = 0.0,
        d_near: float = DEFAULT_D_NEAR,
        eps_overlap: float = DEFAULT_EPS_OVERLAP,
        arrange_margin: float = DEFAULT_ARRANGE_MARGIN,
    ):
        self.objects = {normalize_label(k): v for k, v in objects.items()}
        self.bounds = bounds
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.step_count = 0
        self.h_max = h_max
        self.p_fail = p_fail
        self.d_near = d_near
        self.eps_overlap = eps_overlap
        self.arrange_margin = arrange_margin
        self._by_key = {label_key(k): k for k in self.objects}
        self._validate()

    # -- lookups ---------------------------------------------------------

    def catalog(self) -> list[str]:
        return list(self.objects)

    def lookup(self, name: str) -> str:
        key = label_key(name)
        if key not in self._by_key:
            raise UnknownObjectError(name)
        return self._by_key[key]

    def pose(self, name: str) -> ObjPose:
        return self.objects[self.lookup(name)]

    def children_of(self, name: str) -> list[str]:
        name = self.lookup(name)
        return [o for o, p in self.objects.items() if p.support == name]

    def objects_above(self, name: str) -> list[str]:
        """Everything resting on ``name``, transitively, bottom to top."""
        out: list[str] = []
        frontier = [self.lookup(name)]
        while frontier:
            cur = frontier.pop(0)
            for child in self.children_of(cur):
                out.append(child)
                frontier.append(child)
        return sorted(out, key=lambda o: self.objects[o].z_level)

    def top_of_stack(self, name: str, ignoring: Optional[str] = None) -> str:
        """Topmost object of the stack containing ``name``."""
        name = self.lookup(name)
        cur = name
        while True:
            children = [c for c in self.children_of(cur) if c != ignoring]
            if not children:
                return cur
            cur = max(children, key=lambda o: self.objects[o].z_level)

    def base_objects(self) -> list[str]:
        return [o for o, p in self.objects.items() if p.z_level == 0]

    # -- validation ------------------------------------------------------

    def _validate(self):
        for name, pose in self.objects.items():
            if pose.support is not None:
                sup = pose.support
                if sup not in self.objects:
                    raise SimError(f"{name!r} supported by unknown {sup!r}")
                if pose.z_level != self.objects[sup].z_level + 1:
                    raise SimError(f"{name!r} z_level inconsistent with its support")
            elif pose.z_level != 0:
                raise SimError(f"{name!r} has z_level > 0 but no support")
            if pose.z_level == 0 and not self.bounds.contains(
                pose.x, pose.y, inset=pose.footprint.bound
            ):
                raise SimError(f"{name!r} outside workspace bounds")
        # support links must form a forest
        for name in self.objects:
            seen = {name}
            cur = self.objects[name].support
            while cur is not None:
                if cur in seen:
                    raise SimError(f"support cycle through {name!r}")
                seen.add(cur)
                cur = self.objects[cur].support

    # -- placement geometry ----------------------------------------------

    def compute_drop_point(
        self, subject: str, rel: Relation, target: str
    ) -> tuple[float, float, int]:
        """Placement point for ``move(subject, rel, target)``.

        Directional relations offset the target center by 0.08 m on the
        relevant axis at table level; stacking lands on the target stack's
        top at the target's (x, y). The 0.01 m descent clearance used when
        releasing onto a stack shows up in the low-level action log only.
        """
        subject = self.lookup(subject)
        target = self.lookup(target)
        if subject == target:
            raise SimError("subject equals target")
        tp = self.objects[target]
        sp = self.objects[subject]
        if rel is Relation.STACKED_ON:
            top = self.top_of_stack(target, ignoring=subject)
            z = self.objects[top].z_level + 1
            if z >= self.h_max:
                raise TargetStackFull(f"stack on {target!r} already {z} high")
            return (tp.x, tp.y, z)
        offsets = {
            Relation.IN_FRONT_OF: (0.0, -RELATION_OFFSET),
            Relation.BEHIND: (0.0, RELATION_OFFSET),
            Relation.TO_LEFT_OF: (-RELATION_OFFSET, 0.0),
            Relation.TO_RIGHT_OF: (RELATION_OFFSET, 0.0),
        }
        if rel not in offsets:
            raise SimError(f"not a placement relation: {rel}")
        dx, dy = offsets[rel]
        x, y = tp.x + dx, tp.y + dy
        if not self.bounds.contains(x, y, inset=sp.footprint.bound):
            raise OutOfBoundsError(f"({x:.3f}, {y:.3f}) outside inset bounds")
        return (x, y, 0)

    def _cell_is_free(
        self, x: float, y: float, subject: str, margin: Optional[float] = None
    ) -> bool:
        sp = self.objects[subject]
        margin = self.arrange_margin if margin is None else margin
        if not self.bounds.contains(x, y, inset=sp.footprint.bound + margin):
            return False
        probe = replace(sp, x=x, y=y)
        for other, op in self.objects.items():
            if other == subject or op.z_level != 0:
                continue
            if footprint_gap(probe, op) < margin:
                return False
        return True

    def free_cells(self, subject: str, margin: Optional[float] = None) -> list[GridCell]:
        subject = self.lookup(subject)
        out = []
        for cell in all_cells():
            x, y = cell_center(cell, self.bounds)
            if self._cell_is_free(x, y, subject, margin):
                out.append(cell)
        return out

    def arrange_target(self, subject: str) -> tuple[float, float]:
        """Uniformly sample a clear grid-cell center for ``subject``.

        A cell qualifies when its center keeps at least the subject's
        footprint radius plus the configured margin clear of every other
        base object and of the workspace edge.
        """
        subject = self.lookup(subject)
        cells = self.free_cells(subject)
        if not cells:
            raise NoFreeSpace(f"no free cell for {subject!r}")
        choice = cells[int(self.rng.integers(len(cells)))]
        return cell_center(choice, self.bounds)

    def _nearest_free_point(self, subject: str, from_xy: tuple[float, float]) -> tuple[float, float]:
        """Nearest clear cell center; distance ties broken with the seeded rng."""
        cells = self.free_cells(subject)
        if not cells:
            return from_xy  # nowhere to go; stay put (desk never this full)
        centers = [cell_center(c, self.bounds) for c in cells]
        dists = [math.hypot(x - from_xy[0], y - from_xy[1]) for x, y in centers]
        best = min(dists)
        ties = [c for c, d in zip(centers, dists) if abs(d - best) < 1e-9]
        return ties[int(self.rng.integers(len(ties)))]

    # -- execution ---------------------------------------------------------

    def execute_skill(self, skill: SkillCommand) -> ExecutionOutcome:
        """Execute one command; failures are outcomes, not exceptions.

        Picking an object with anything on top topples the part of the
        stack above it (scattered to nearby free cells) and aborts the
        move. With probability ``p_fail`` the grasp slips and the object
        lands on the source-to-target segment. Placements into an occupied
        footprint are Blocked; everything else succeeds.
        """
        self.step_count += 1
        subject = self.lookup(skill.subject)
        sp = self.objects[subject]
        old = copy.deepcopy(sp)

        above = self.objects_above(subject)
        if above:
            moved = []
            for name in reversed(above):  # unstack from the top down
                p = self.objects[name]
                before = copy.deepcopy(p)
                nx, ny = self._nearest_free_point(name, (p.x, p.y))
                p.x, p.y, p.z_level, p.support = nx, ny, 0, None
                moved.append((name, before, copy.deepcopy(p)))
            return ExecutionOutcome(
                status=Status.TOPPLED,
                moved=moved,
                note=f"picked {subject!r} under {len(above)} object(s); stack toppled",
            )

        try:
            tx, ty, tz, support = self._resolve_target(subject, skill)
        except TargetStackFull as err:
            return ExecutionOutcome(status=Status.BLOCKED, note=str(err))
        except OutOfBoundsError as err:
            return ExecutionOutcome(status=Status.OUT_OF_BOUNDS, note=str(err))
        except NoFreeSpace as err:
            return ExecutionOutcome(status=Status.BLOCKED, note=str(err))

        if self.p_fail > 0.0 and float(self.rng.random()) < self.p_fail:
            frac = float(self.rng.random())
            lx = sp.x + frac * (tx - sp.x)
            ly = sp.y + frac * (ty - sp.y)
            inset = sp.footprint.bound
            lx = min(max(lx, self.bounds.x0 + inset), self.bounds.x1 - inset)
            ly = min(max(ly, self.bounds.y0 + inset), self.bounds.y1 - inset)
            if not self._spot_is_clear(subject, lx, ly):
                lx, ly = self._nearest_free_point(subject, (lx, ly))
            sp.x, sp.y, sp.z_level, sp.support = lx, ly, 0, None
            return ExecutionOutcome(
                status=Status.GRASP_FAILED,
                moved=[(subject, old, copy.deepcopy(sp))],
                note=f"suction lost at {frac:.3f} of the way to the target",
            )

        if tz == 0 and not self._spot_is_clear(subject, tx, ty):
            return ExecutionOutcome(
                status=Status.BLOCKED,
                note=f"placement at ({tx:.3f}, {ty:.3f}) overlaps another object",
            )

        sp.x, sp.y, sp.z_level, sp.support = tx, ty, tz, support
        return ExecutionOutcome(
            status=Status.SUCCESS, moved=[(subject, old, copy.deepcopy(sp))]
        )

    def _spot_is_clear(self, subject: str, x: float, y: float) -> bool:
        probe = replace(self.objects[subject], x=x, y=y)
        for other, op in self.objects.items():
            if other == subject or op.z_level != 0:
                continue
            if footprint_gap(probe, op) < -self.eps_overlap:
                return False
        return True

    def _resolve_target(
        self, subject: str, skill: SkillCommand
    ) -> tuple[float, float, int, Optional[str]]:
        if skill.kind == RELATION_MOVE:
            target = self.lookup(skill.target)
            x, y, z = self.compute_drop_point(subject, skill.relation, target)
            support = self.top_of_stack(target, ignoring=subject) if z > 0 else None
            return x, y, z, support
        if skill.kind == GRID_MOVE:
            x, y = cell_center(skill.cell, self.bounds)
            if not self.bounds.contains(x, y, inset=self.objects[subject].footprint.bound):
                raise OutOfBoundsError(f"cell {skill.cell.ident} too close to the edge")
            return x, y, 0, None
        if skill.kind == ARRANGE:
            x, y = self.arrange_target(subject)
            return x, y, 0, None
        raise SimError(f"unknown skill kind {skill.kind!r}")

    # -- observation -------------------------------------------------------

    def extract_eval_graph(self, d_near: Optional[float] = None) -> SceneGraph:
        """Ground-truth scene graph from object positions: support links
        become Stacked On edges; base objects whose footprint gap is under
        the nearness threshold become Near pairs."""
        d_near = self.d_near if d_near is None else d_near
        edges: list[tuple[str, Relation, str]] = []
        for name, pose in self.objects.items():
            if pose.support is not None:
                edges.append((name, Relation.STACKED_ON, pose.support))
        stacked_pairs = {frozenset((label_key(a), label_key(b))) for a, _r, b in edges}
        bases = self.base_objects()
        for i, a in enumerate(bases):
            for b in bases[i + 1 :]:
                if frozenset((label_key(a), label_key(b))) in stacked_pairs:
                    continue
                if footprint_gap(self.objects[a], self.objects[b]) < d_near:
                    edges.append((a, Relation.NEAR, b))
        return SceneGraph.make(self.objects.keys(), edges)

    def observation(self) -> list[dict]:
        """Structured object list used in place of camera images. Footprint
        extents ride along so remote views can draw to scale."""
        out = []
        for name, pose in self.objects.items():
            rec = {
                "name": name,
                "x": round(pose.x, 6),
                "y": round(pose.y, 6),
                "z_level": pose.z_level,
                "support": pose.support,
                "r": round(pose.footprint.bound, 6),
            }
            if pose.footprint.polygon is not None:
                rec["polygon"] = [
                    [round(px, 6), round(py, 6)] for px, py in world_polygon(pose)
                ]
            out.append(rec)
        return out

    def observation_text(self) -> str:
        return json.dumps(self.observation(), indent=1)

    # -- rendering ---------------------------------------------------------

    def render_ascii(self) -> str:
        from .grid import GRID_COLS, GRID_ROWS

        rows = []
        header = "   " + " ".join(f"{c:>2d}" for c in GRID_COLS)
        rows.append(header)
        occupancy: dict[str, list[str]] = {}
        for name, pose in self.objects.items():
            from .grid import cell_of

            cell = cell_of(pose.x, pose.y, self.bounds)
            occupancy.setdefault(cell.ident, []).append(name)
        for r in reversed(GRID_ROWS):
            cells = []
            for c in GRID_COLS:
                names = occupancy.get(f"{r}{c}", [])
                if not names:
                    cells.append(" .")
                elif len(names) == 1:
                    cells.append(f" {names[0][0].upper()}")
                else:
                    cells.append(f"{len(names)}+")
            rows.append(f" {r} " + " ".join(cells))
        return "\n".join(rows)

    def render_svg(self, scale: float = 500.0, highlight: Sequence[str] = ()) -> str:
        """Top-down SVG with the labeled A1-E10 grid and one glyph per
        object; stacked objects carry a badge with their level."""
        from .grid import GRID_COLS, GRID_ROWS

        w = self.bounds.width * scale
        h = self.bounds.height * scale
        hl = {label_key(n) for n in highlight}

        def sx(x: float) -> float:
            return (x - self.bounds.x0) * scale

        def sy(y: float) -> float:
            return h - (y - self.bounds.y0) * scale  # svg y grows downward

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.0f} {h:.0f}" '
            f'width="{w:.0f}" height="{h:.0f}">',
            f'<rect x="0" y="0" width="{w:.0f}" height="{h:.0f}" fill="#fbf7ef"/>',
        ]
        cw = self.bounds.width / len(GRID_COLS)
        ch = self.bounds.height / len(GRID_ROWS)
        for ri, r in enumerate(GRID_ROWS):
            for ci, c in enumerate(GRID_COLS):
                x0 = sx(self.bounds.x0 + ci * cw)
                y0 = sy(self.bounds.y0 + (ri + 1) * ch)
                parts.append(
                    f'<rect class="cell" data-cell="{r}{c}" x="{x0:.1f}" y="{y0:.1f}" '
                    f'width="{cw * scale:.1f}" height="{ch * scale:.1f}" '
                    'fill="none" stroke="#c9c2b4" stroke-width="1"/>'
                )
                parts.append(
                    f'<text class="cell-label" x="{x0 + 3:.1f}" y="{y0 + 11:.1f}" '
                    f'font-size="9" fill="#a39b8a">{r}{c}</text>'
                )
        for name, pose in sorted(self.objects.items(), key=lambda kv: kv[1].z_level):
            cx, cy = sx(pose.x), sy(pose.y)
            tone = "#d8713c" if label_key(name) in hl else "#4f7bb0"
            if pose.footprint.polygon is not None:
                pts = " ".join(f"{sx(px):.1f},{sy(py):.1f}" for px, py in world_polygon(pose))
                parts.append(
                    f'<polygon class="obj" data-name="{name}" data-z="{pose.z_level}" '
                    f'points="{pts}" fill="{tone}" fill-opacity="0.85" stroke="#2d3a4a"/>'
                )
            else:
                rr = pose.footprint.radius * scale
                parts.append(
                    f'<circle class="obj" data-name="{name}" data-z="{pose.z_level}" '
                    f'cx="{cx:.1f}" cy="{cy:.1f}" r="{rr:.1f}" fill="{tone}" '
                    f'fill-opacity="0.85" stroke="#2d3a4a"/>'
                )
            parts.append(
                f'<text class="obj-label" x="{cx:.1f}" y="{cy - 6:.1f}" font-size="10" '
                f'text-anchor="middle" fill="#1d2733">{name}</text>'
            )
            if pose.z_level > 0:
                parts.append(
                    f'<text class="stack-badge" data-name="{name}" x="{cx:.1f}" '
                    f'y="{cy + 4:.1f}" font-size="11" text-anchor="middle" '
                    f'fill="#ffffff">{pose.z_level + 1}</text>'
                )
        parts.append("</svg>")
        return "\n".join(parts)

    def render(self, fmt: str = "ascii", **kwargs) -> str:
        if fmt == "ascii":
            return self.render_ascii()
        if fmt == "svg":
            return self.render_svg(**kwargs)
        if fmt == "observation":
            return self.observation_text()
        raise ValueError(f"unknown render format {fmt!r}")

    # -- snapshots ---------------------------------------------------------

    def clone(self) -> "World":
        return copy.deepcopy(self)

    def to_json(self) -> dict:
        return {
            "bounds": [self.bounds.x0, self.bounds.y0, self.bounds.x1, self.bounds.y1],
            "seed": self.seed,
            "step_count": self.step_count,
            "h_max": self.h_max,
            "p_fail": self.p_fail,
            "d_near": self.d_near,
            "objects": {name: pose.to_json() for name, pose in self.objects.items()},
        }


def load_scenario(source: Path | str | dict, seed: Optional[int] = None, **overrides) -> World:
    """Build a world from a scenario file or dict.

    Scenario schema: ``{"name", "bounds": [x0,y0,x1,y1], "seed", "objects":
    [{"name", "x", "y", "radius"|"polygon", "yaw", "stacked_on"}...]}`` plus
    optional simulator parameters. Objects with ``stacked_on`` derive their
    pose from their support. ``seed`` and keyword overrides win over the
    file's values.
    """
    if isinstance(source, dict):
        data = source
    else:
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    bounds = Rect(*data.get("bounds", [0.0, 0.0, 1.0, 1.0]))

    objects: dict[str, ObjPose] = {}
    deferred: list[dict] = []
    for spec in data["objects"]:
        name = normalize_label(spec["name"])
        if spec.get("stacked_on"):
            deferred.append(spec)
            continue
        fp = (
            Footprint(polygon=tuple((float(x), float(y)) for x, y in spec["polygon"]))
            if "polygon" in spec
            else Footprint(radius=float(spec.get("radius", DEFAULT_RADIUS)))
        )
        objects[name] = ObjPose(
            x=float(spec["x"]), y=float(spec["y"]), footprint=fp, yaw=float(spec.get("yaw", 0.0))
        )
    for spec in deferred:
        name = normalize_label(spec["name"])
        support = normalize_label(spec["stacked_on"])
        if support not in objects:
            raise SimError(f"{name!r} stacked on unknown object {support!r}")
        top = support
        while any(p.support == top for p in objects.values()):
            top = next(n for n, p in objects.items() if p.support == top)
        sp = objects[top]
        fp = Footprint(radius=float(spec.get("radius", DEFAULT_RADIUS)))
        objects[name] = ObjPose(
            x=sp.x, y=sp.y, z_level=sp.z_level + 1, support=top, footprint=fp
        )

    params = dict(
        seed=data.get("seed", 0),
        h_max=data.get("h_max", DEFAULT_H_MAX),
        p_fail=data.get("p_fail", 0.0),
        d_near=data.get("d_near", DEFAULT_D_NEAR),
    )
    params.update(overrides)
    if seed is not None:
        params["seed"] = seed
    return World(objects, bounds=bounds, **params)


def packaged_scenario_path(name: str) -> Path:
    """Resolve a scenario shipped with the package by bare name."""
    from importlib import resources

    candidate = Path(name)
    if candidate.exists():
        return candidate
    packaged = resources.files("scenescout") / "scenarios" / f"{name}.json"
    with resources.as_file(packaged) as p:
        if p.exists():
            return Path(str(p))
    raise FileNotFoundError(f"no scenario named {name!r}")
