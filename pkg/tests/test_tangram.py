from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from scenescout.simulator import Footprint, ObjPose, load_scenario, packaged_scenario_path, world_polygon
from scenescout.tangram import (
    DegeneratePolygon,
    align_tangram,
    candidate_alignment,
    simplify_polygon,
)


def poly_pose(x, y, vertices, yaw=0.0) -> ObjPose:
    return ObjPose(x=x, y=y, yaw=yaw, footprint=Footprint(polygon=tuple(vertices)))


SQUARE = [(-0.035, -0.035), (0.035, -0.035), (0.035, 0.035), (-0.035, 0.035)]
RIGHT_TRI = [(0.0, 0.0), (0.08, 0.0), (0.0, 0.06)]
MIRROR_TRI = [(0.0, 0.0), (0.0, 0.06), (-0.08, 0.0)]


class TestSimplify:
    def test_collinear_vertices_dropped(self):
        noisy = [
            (-0.035, -0.035),
            (0.0, -0.035),  # midpoint of the bottom edge
            (0.035, -0.035),
            (0.035, 0.035),
            (-0.035, 0.035),
        ]
        assert len(simplify_polygon(noisy)) == 4

    def test_true_corners_survive(self):
        assert simplify_polygon(SQUARE) == SQUARE

    def test_degenerate_raises(self):
        with pytest.raises(DegeneratePolygon):
            simplify_polygon([(0, 0), (0.05, 0), (0.1, 0)])


def oracle_candidates(src_pose, dst_pose, lambda_occ=10.0):
    """Independent enumeration: for every edge pair and parity, rebuild the
    transform from scratch with shapely affine ops and score it."""
    from shapely import affinity

    src = simplify_polygon(world_polygon(src_pose))
    dst = simplify_polygon(world_polygon(dst_pose))
    dst_poly = Polygon(dst)
    results = []
    for si in range(len(src)):
        a1, a2 = src[si], src[(si + 1) % len(src)]
        for di in range(len(dst)):
            b1, b2 = dst[di], dst[(di + 1) % len(dst)]
            for anti in (False, True):
                alpha = math.atan2(a2[1] - a1[1], a2[0] - a1[0])
                beta = math.atan2(b2[1] - b1[1], b2[0] - b1[0])
                theta = beta - alpha + (math.pi if anti else 0.0)
                moved = affinity.rotate(
                    Polygon(src), theta, origin=(0, 0), use_radians=True
                )
                ma = ((a1[0] + a2[0]) / 2, (a1[1] + a2[1]) / 2)
                c, s = math.cos(theta), math.sin(theta)
                rma = (c * ma[0] - s * ma[1], s * ma[0] + c * ma[1])
                mb = ((b1[0] + b2[0]) / 2, (b1[1] + b2[1]) / 2)
                moved = affinity.translate(moved, mb[0] - rma[0], mb[1] - rma[1])
                # contact: both edges are collinear through mb; overlap of
                # centered intervals is the shorter edge length
                la = math.dist(a1, a2)
                lb = math.dist(b1, b2)
                contact = min(la, lb)
                overlap = moved.intersection(dst_poly).area
                results.append(
                    {
                        "si": si,
                        "di": di,
                        "anti": anti,
                        "score": contact - lambda_occ * overlap,
                        "overlap": overlap,
                        "contact": contact,
                    }
                )
    return results


class TestAlign:
    def test_identical_squares_full_edge_contact(self):
        src = poly_pose(0.3, 0.3, SQUARE)
        dst = poly_pose(0.7, 0.3, SQUARE)
        best = align_tangram(src, dst)
        assert best.contact == pytest.approx(0.07, abs=1e-9)
        assert best.overlap_area < 1e-9
        # the moved square shares a full edge and does not cover the target
        moved = Polygon(
            [
                (
                    math.cos(best.yaw) * x - math.sin(best.yaw) * y + best.translation[0],
                    math.sin(best.yaw) * x + math.cos(best.yaw) * y + best.translation[1],
                )
                for x, y in world_polygon(src)
            ]
        )
        assert moved.intersection(Polygon(world_polygon(dst))).area < 1e-9
        assert moved.area == pytest.approx(0.07 * 0.07)

    def test_mirrored_right_triangles_align_hypotenuses(self):
        src = poly_pose(0.3, 0.5, RIGHT_TRI)
        dst = poly_pose(0.7, 0.5, MIRROR_TRI)
        best = align_tangram(src, dst)
        src_pts = simplify_polygon(world_polygon(src))
        dst_pts = simplify_polygon(world_polygon(dst))
        hyp_src = max(
            range(len(src_pts)),
            key=lambda i: math.dist(src_pts[i], src_pts[(i + 1) % len(src_pts)]),
        )
        hyp_dst = max(
            range(len(dst_pts)),
            key=lambda i: math.dist(dst_pts[i], dst_pts[(i + 1) % len(dst_pts)]),
        )
        assert best.source_edge == hyp_src
        assert best.dest_edge == hyp_dst
        assert best.contact == pytest.approx(0.1, abs=1e-9)

    def test_full_overlap_scores_below_any_clean_contact(self):
        src = poly_pose(0.3, 0.3, SQUARE)
        dst = poly_pose(0.7, 0.3, SQUARE)
        src_pts = simplify_polygon(world_polygon(src))
        dst_pts = simplify_polygon(world_polygon(dst))
        scores = []
        full_overlap_scores = []
        for si, di, anti in itertools.product(range(4), range(4), (False, True)):
            cand = candidate_alignment(src_pts, dst_pts, si, di, anti)
            area = 0.07 * 0.07
            if cand.overlap_area > 0.9 * area:
                full_overlap_scores.append(cand.score)
            elif cand.overlap_area < 1e-9:
                scores.append(cand.score)
        assert full_overlap_scores, "expected some fully-covering candidates"
        assert min(scores) > max(full_overlap_scores)

    def test_matches_exhaustive_oracle_on_tangram_set(self):
        w = load_scenario(packaged_scenario_path("tangram4"))
        pieces = [w.objects[name] for name in w.catalog()]
        for src, dst in itertools.permutations(pieces, 2):
            best = align_tangram(src, dst)
            oracle = oracle_candidates(src, dst)
            top = max(o["score"] for o in oracle)
            assert best.score == pytest.approx(top, abs=1e-9)
            chosen = next(
                o
                for o in oracle
                if o["si"] == best.source_edge
                and o["di"] == best.dest_edge
                and o["anti"] == best.antiparallel
            )
            assert chosen["score"] == pytest.approx(top, abs=1e-9)
            # a chosen placement never buries the destination
            src_area = Polygon(world_polygon(src)).area
            assert best.overlap_area < 0.5 * src_area

    def test_jitter_slides_along_edge_and_stays_deterministic(self):
        src = poly_pose(0.3, 0.3, SQUARE)
        dst = poly_pose(0.7, 0.3, SQUARE)
        a = align_tangram(src, dst, jitter_rng=np.random.default_rng(4), jitter_max=0.01)
        b = align_tangram(src, dst, jitter_rng=np.random.default_rng(4), jitter_max=0.01)
        assert a == b
        assert a.contact <= 0.07 + 1e-12

    def test_non_polygon_pose_rejected(self):
        with pytest.raises(DegeneratePolygon):
            align_tangram(ObjPose(0.5, 0.5), poly_pose(0.3, 0.3, SQUARE))
