"""Edge alignment for flat polygonal pieces.

Given a source piece and a destination piece, find the in-plane rotation and
translation that butt one source edge against one destination edge with the
longest contact while avoiding covering the destination. Vertex chains are
simplified first (deviation threshold proportional to the perimeter), then
every (source edge, destination edge) pair is tried in both the parallel and
anti-parallel orientation; each candidate maps the source edge midpoint onto
the destination edge midpoint, optionally with a small jittered slide along
the edge. Candidates are scored as contact length minus an occlusion penalty
on the overlap area, and the best one wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Polygon

from .simulator import ObjPose, world_polygon

EPS_RATIO = 0.02
DEFAULT_LAMBDA_OCC = 10.0  # score penalty per square meter of overlap


class DegeneratePolygon(Exception):
    """Fewer than 3 distinct vertices remain after simplification."""


Point = tuple[float, float]


def _perimeter(vertices: Sequence[Point]) -> float:
    n = len(vertices)
    return sum(
        math.dist(vertices[i], vertices[(i + 1) % n]) for i in range(n)
    )


def _deviation(prev: Point, mid: Point, nxt: Point) -> float:
    """Perpendicular distance of ``mid`` from the chord prev->nxt."""
    (x1, y1), (x2, y2), (x0, y0) = prev, nxt, mid
    dx, dy = x2 - x1, y2 - y1
    chord = math.hypot(dx, dy)
    if chord < 1e-12:
        return math.dist(mid, prev)
    return abs(dx * (y1 - y0) - dy * (x1 - x0)) / chord


def simplify_polygon(vertices: Sequence[Point], eps_ratio: float = EPS_RATIO) -> list[Point]:
    """Drop near-collinear vertices until every remaining one deviates from
    its neighbors' chord by at least ``eps_ratio`` times the perimeter."""
    pts = [tuple(map(float, v)) for v in vertices]
    # collapse duplicate points first
    deduped: list[Point] = []
    for p in pts:
        if not deduped or math.dist(p, deduped[-1]) > 1e-9:
            deduped.append(p)
    if len(deduped) > 1 and math.dist(deduped[0], deduped[-1]) < 1e-9:
        deduped.pop()
    pts = deduped
    eps = eps_ratio * _perimeter(pts) if pts else 0.0
    changed = True
    while changed and len(pts) > 2:
        changed = False
        devs = [
            _deviation(pts[i - 1], pts[i], pts[(i + 1) % len(pts)])
            for i in range(len(pts))
        ]
        worst = min(range(len(pts)), key=lambda i: devs[i])
        if devs[worst] < eps:
            pts.pop(worst)
            changed = True
    if len(pts) < 3:
        raise DegeneratePolygon(f"{len(pts)} vertices after simplification")
    return pts


@dataclass(frozen=True)
class Alignment:
    yaw: float  # rotation applied to the source piece, radians, in (-pi, pi]
    translation: tuple[float, float]
    score: float
    contact: float
    overlap_area: float
    source_edge: int
    dest_edge: int
    antiparallel: bool


def _edges(pts: Sequence[Point]) -> list[tuple[Point, Point]]:
    return [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]


def _transform(pts: Sequence[Point], yaw: float, t: tuple[float, float]) -> list[Point]:
    c, s = math.cos(yaw), math.sin(yaw)
    return [(c * x - s * y + t[0], s * x + c * y + t[1]) for x, y in pts]


def candidate_alignment(
    src_pts: Sequence[Point],
    dst_pts: Sequence[Point],
    si: int,
    di: int,
    antiparallel: bool,
    slide: float = 0.0,
    lambda_occ: float = DEFAULT_LAMBDA_OCC,
) -> Alignment:
    """Score one (source edge, destination edge, parity) candidate."""
    (a1, a2) = _edges(src_pts)[si]
    (b1, b2) = _edges(dst_pts)[di]
    alpha = math.atan2(a2[1] - a1[1], a2[0] - a1[0])
    beta = math.atan2(b2[1] - b1[1], b2[0] - b1[0])
    yaw = beta - alpha + (math.pi if antiparallel else 0.0)
    yaw = math.atan2(math.sin(yaw), math.cos(yaw))  # wrap to (-pi, pi]

    ma = ((a1[0] + a2[0]) / 2, (a1[1] + a2[1]) / 2)
    mb = ((b1[0] + b2[0]) / 2, (b1[1] + b2[1]) / 2)
    ub = ((b2[0] - b1[0]), (b2[1] - b1[1]))
    blen = math.hypot(*ub)
    u = (ub[0] / blen, ub[1] / blen) if blen > 0 else (0.0, 0.0)
    c, s = math.cos(yaw), math.sin(yaw)
    rot_ma = (c * ma[0] - s * ma[1], s * ma[0] + c * ma[1])
    t = (mb[0] - rot_ma[0] + slide * u[0], mb[1] - rot_ma[1] + slide * u[1])

    moved = _transform(src_pts, yaw, t)
    (na1, na2) = _edges(moved)[si]
    # contact = 1-D overlap of the two edges projected on the shared line
    proj = lambda p: (p[0] - b1[0]) * u[0] + (p[1] - b1[1]) * u[1]
    lo_a, hi_a = sorted((proj(na1), proj(na2)))
    lo_b, hi_b = sorted((proj(b1), proj(b2)))
    contact = max(0.0, min(hi_a, hi_b) - max(lo_a, lo_b))

    overlap = Polygon(moved).intersection(Polygon(dst_pts)).area
    score = contact - lambda_occ * overlap
    return Alignment(
        yaw=yaw,
        translation=t,
        score=score,
        contact=contact,
        overlap_area=overlap,
        source_edge=si,
        dest_edge=di,
        antiparallel=antiparallel,
    )


def align_tangram(
    source: ObjPose,
    destination: ObjPose,
    jitter_rng: Optional[np.random.Generator] = None,
    jitter_max: float = 0.0,
    lambda_occ: float = DEFAULT_LAMBDA_OCC,
    eps_ratio: float = EPS_RATIO,
) -> Alignment:
    """Best edge-to-edge alignment of ``source`` against ``destination``.

    Both poses must carry polygon footprints. The returned yaw/translation
    map the source piece's current world outline onto its aligned placement.
    Ties go to the earliest (source edge, dest edge, parallel-first)
    candidate so results are stable for a fixed rng.
    """
    if source.footprint.polygon is None or destination.footprint.polygon is None:
        raise DegeneratePolygon("both pieces need polygon footprints")
    src_pts = simplify_polygon(world_polygon(source), eps_ratio)
    dst_pts = simplify_polygon(world_polygon(destination), eps_ratio)

    best: Optional[Alignment] = None
    for si in range(len(src_pts)):
        for di in range(len(dst_pts)):
            for anti in (False, True):
                slide = 0.0
                if jitter_max > 0.0 and jitter_rng is not None:
                    slide = float(jitter_rng.uniform(-jitter_max, jitter_max))
                cand = candidate_alignment(
                    src_pts, dst_pts, si, di, anti, slide=slide, lambda_occ=lambda_occ
                )
                if best is None or cand.score > best.score + 1e-12:
                    best = cand
    assert best is not None
    return best
