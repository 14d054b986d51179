from __future__ import annotations

import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from scenescout.graphs import Relation, SceneGraph, label_key
from scenescout.grid import GridCell, Rect, all_cells, cell_center, cell_of
from scenescout.simulator import (
    Footprint,
    ObjPose,
    OutOfBoundsError,
    Status,
    TargetStackFull,
    UnknownObjectError,
    World,
    footprint_gap,
    load_scenario,
    packaged_scenario_path,
)
from scenescout.skills import arrange, grid_move, relation_move


def disc(x, y, r=0.03, **kw) -> ObjPose:
    return ObjPose(x=x, y=y, footprint=Footprint(radius=r), **kw)


def small_world(seed=0, **kw) -> World:
    return World(
        {
            "cup": disc(0.5, 0.5),
            "tray": disc(0.2, 0.2, r=0.05),
            "ball": disc(0.8, 0.8),
        },
        seed=seed,
        **kw,
    )


class TestDropPoint:
    def test_left_offset(self):
        w = World({"a": disc(0.5, 0.5), "b": disc(0.3, 0.3)}, seed=0)
        assert w.compute_drop_point("b", Relation.TO_LEFT_OF, "a") == (0.42, 0.5, 0)

    def test_right_front_behind(self):
        w = World({"a": disc(0.5, 0.5), "b": disc(0.3, 0.3)}, seed=0)
        assert w.compute_drop_point("b", Relation.TO_RIGHT_OF, "a") == (0.58, 0.5, 0)
        assert w.compute_drop_point("b", Relation.IN_FRONT_OF, "a") == (0.5, 0.42, 0)
        assert w.compute_drop_point("b", Relation.BEHIND, "a") == (0.5, 0.58, 0)

    def test_stack_on_base(self):
        w = small_world()
        assert w.compute_drop_point("cup", Relation.STACKED_ON, "tray") == (0.2, 0.2, 1)

    def test_stack_goes_to_top_of_stack(self):
        w = World(
            {
                "base": disc(0.5, 0.5),
                "mid": ObjPose(0.5, 0.5, z_level=1, support="base"),
                "cup": disc(0.2, 0.2),
            },
            seed=0,
        )
        x, y, z = w.compute_drop_point("cup", Relation.STACKED_ON, "base")
        assert z == 2

    def test_stack_full(self):
        w = World(
            {
                "base": disc(0.5, 0.5),
                "mid": ObjPose(0.5, 0.5, z_level=1, support="base"),
                "top": ObjPose(0.5, 0.5, z_level=2, support="mid"),
                "cup": disc(0.2, 0.2),
            },
            seed=0,
            h_max=3,
        )
        with pytest.raises(TargetStackFull):
            w.compute_drop_point("cup", Relation.STACKED_ON, "base")

    def test_behind_near_back_boundary_out_of_bounds(self):
        w = World({"a": disc(0.5, 0.95), "b": disc(0.2, 0.2)}, seed=0)
        # 0.95 + 0.08 = 1.03 with a 0.03 inset: outside.
        with pytest.raises(OutOfBoundsError):
            w.compute_drop_point("b", Relation.BEHIND, "a")


class TestArrange:
    def test_single_object_lands_on_a_cell_center(self):
        w = World({"a": disc(0.5, 0.5)}, seed=42)
        x, y = w.arrange_target("a")
        centers = [cell_center(c) for c in all_cells()]
        assert any(math.isclose(x, cx) and math.isclose(y, cy) for cx, cy in centers)

    def test_only_free_neighborhood_is_chosen(self):
        # Fill every cell except C5's neighborhood with blockers.
        objects = {"mover": disc(0.45, 0.45)}
        target = GridCell("C", 5)
        idx = 0
        for cell in all_cells():
            if cell == target:
                continue
            x, y = cell_center(cell)
            if math.hypot(x - 0.45, y - 0.45) < 1e-9:
                continue
            objects[f"blk{idx}"] = disc(x, y, r=0.04)
            idx += 1
        w = World(objects, seed=1, arrange_margin=0.005)
        free = w.free_cells("mover")
        assert free == [target]

    def test_fully_packed_raises(self):
        from scenescout.simulator import NoFreeSpace

        objects = {"mover": disc(0.45, 0.45, r=0.04)}
        for i, cell in enumerate(all_cells()):
            x, y = cell_center(cell)
            if math.hypot(x - 0.45, y - 0.45) < 1e-9:
                continue
            objects[f"blk{i}"] = disc(x, y, r=0.045)
        w = World(objects, seed=1)
        with pytest.raises(NoFreeSpace):
            w.arrange_target("mover")


class TestExecute:
    def test_stack_success(self):
        w = small_world()
        out = w.execute_skill(relation_move("cup", Relation.STACKED_ON, "tray"))
        assert out.status is Status.SUCCESS
        assert w.pose("cup").z_level == 1
        assert w.pose("cup").support == "tray"
        assert w.step_count == 1

    def test_pick_non_top_topples(self):
        w = World(
            {
                "base": disc(0.5, 0.5),
                "top": ObjPose(0.5, 0.5, z_level=1, support="base"),
                "cup": disc(0.2, 0.2),
            },
            seed=0,
        )
        out = w.execute_skill(grid_move("base", "B3"))
        assert out.status is Status.TOPPLED
        assert w.pose("top").z_level == 0
        assert w.pose("top").support is None
        # the subject did not move
        assert (w.pose("base").x, w.pose("base").y) == (0.5, 0.5)

    def test_grasp_failure_lands_on_segment(self):
        w = World({"a": disc(0.2, 0.5), "b": disc(0.8, 0.5)}, seed=7, p_fail=1.0)
        rng = np.random.default_rng(7)
        rng.random()  # failure draw
        frac = float(rng.random())
        out = w.execute_skill(relation_move("a", Relation.TO_LEFT_OF, "b"))
        assert out.status is Status.GRASP_FAILED
        expect_x = 0.2 + frac * (0.72 - 0.2)
        assert w.pose("a").x == pytest.approx(expect_x)
        assert w.pose("a").y == pytest.approx(0.5)

    def test_blocked_when_target_spot_occupied(self):
        w = World(
            {"a": disc(0.5, 0.5), "b": disc(0.58, 0.5), "c": disc(0.2, 0.2)},
            seed=0,
        )
        out = w.execute_skill(relation_move("c", Relation.TO_RIGHT_OF, "a"))
        assert out.status is Status.BLOCKED
        assert (w.pose("c").x, w.pose("c").y) == (0.2, 0.2)

    def test_out_of_bounds_is_outcome(self):
        w = World({"a": disc(0.5, 0.95), "b": disc(0.2, 0.2)}, seed=0)
        out = w.execute_skill(relation_move("b", Relation.BEHIND, "a"))
        assert out.status is Status.OUT_OF_BOUNDS

    def test_unknown_object_is_exception(self):
        w = small_world()
        with pytest.raises(UnknownObjectError):
            w.execute_skill(arrange("ghost"))

    def test_stack_full_is_blocked_outcome(self):
        w = World(
            {
                "base": disc(0.5, 0.5),
                "mid": ObjPose(0.5, 0.5, z_level=1, support="base"),
                "top": ObjPose(0.5, 0.5, z_level=2, support="mid"),
                "cup": disc(0.2, 0.2),
            },
            seed=0,
        )
        out = w.execute_skill(relation_move("cup", Relation.STACKED_ON, "base"))
        assert out.status is Status.BLOCKED

    def test_determinism_same_seed_same_trace(self):
        def run(seed):
            w = World(
                {"a": disc(0.3, 0.3), "b": disc(0.7, 0.7), "c": disc(0.3, 0.7)},
                seed=seed,
                p_fail=0.3,
            )
            seq = [
                arrange("a"),
                relation_move("b", Relation.TO_LEFT_OF, "c"),
                grid_move("a", "E9"),
                relation_move("c", Relation.STACKED_ON, "b"),
                arrange("b"),
            ]
            log = [w.execute_skill(s).to_json() for s in seq]
            return log, w.to_json()

        assert run(5) == run(5)
        assert run(5) != run(6)

    def test_conservation_and_forest_after_random_skills(self):
        import random

        pyrng = random.Random(0)
        w = World(
            {f"o{i}": disc(0.15 + 0.17 * i, 0.5) for i in range(5)},
            seed=3,
            p_fail=0.2,
        )
        names = w.catalog()
        from scenescout.graphs import PLACEMENT_RELATIONS

        for _ in range(200):
            kind = pyrng.randrange(3)
            if kind == 0:
                a, b = pyrng.sample(names, 2)
                skill = relation_move(a, pyrng.choice(PLACEMENT_RELATIONS), b)
            elif kind == 1:
                skill = grid_move(pyrng.choice(names), pyrng.choice(all_cells()))
            else:
                skill = arrange(pyrng.choice(names))
            w.execute_skill(skill)
            assert set(w.catalog()) == set(names)
            w._validate()  # bounds, z-consistency, forest acyclicity


def brute_force_eval_graph(world: World) -> SceneGraph:
    """Independent pairwise reimplementation of graph extraction."""
    edges = []
    names = world.catalog()
    for n in names:
        p = world.objects[n]
        if p.support:
            edges.append((n, Relation.STACKED_ON, p.support))
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            pa, pb = world.objects[a], world.objects[b]
            if pa.z_level != 0 or pb.z_level != 0:
                continue
            d = math.hypot(pa.x - pb.x, pa.y - pb.y)
            gap = d - pa.footprint.radius - pb.footprint.radius
            if gap < world.d_near:
                edges.append((a, Relation.NEAR, b))
    return SceneGraph.make(names, edges)


class TestEvalGraph:
    def test_far_apart_no_edges(self):
        w = World({"a": disc(0.1, 0.1), "b": disc(0.9, 0.9)}, seed=0)
        g = w.extract_eval_graph()
        assert len(g.nodes) == 2 and len(g.edges) == 0

    def test_stacked_edge(self):
        w = World(
            {"B": disc(0.5, 0.5), "A": ObjPose(0.5, 0.5, z_level=1, support="B")},
            seed=0,
        )
        g = w.extract_eval_graph()
        assert ("A", Relation.STACKED_ON, "B") in g.edges

    def test_relation_move_produces_near(self):
        w = World({"a": disc(0.3, 0.5), "b": disc(0.7, 0.5)}, seed=0)
        w.execute_skill(relation_move("a", Relation.TO_LEFT_OF, "b"))
        g = w.extract_eval_graph()
        assert ("a", Relation.NEAR, "b") in g.edges

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_on_seeded_layouts(self, seed):
        rng = np.random.default_rng(seed)
        objects = {}
        for i in range(6):
            objects[f"o{i}"] = disc(
                float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9))
            )
        w = World(objects, seed=seed)
        assert w.extract_eval_graph() == brute_force_eval_graph(w)

    def test_property_suite_100_random_layouts(self):
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            objects = {
                f"o{i}": disc(float(rng.uniform(0.1, 0.9)), float(rng.uniform(0.1, 0.9)))
                for i in range(5)
            }
            w = World(objects, seed=seed)
            assert w.extract_eval_graph() == brute_force_eval_graph(w)


class TestRender:
    def test_empty_world_svg_has_50_cells_no_glyphs(self):
        w = World({}, seed=0)
        root = ET.fromstring(w.render_svg())
        cells = [e for e in root.iter() if e.get("class") == "cell"]
        glyphs = [e for e in root.iter() if e.get("class") == "obj"]
        labels = {e.text for e in root.iter() if e.get("class") == "cell-label"}
        assert len(cells) == 50 and len(glyphs) == 0 and len(labels) == 50

    def test_observation_lists_exact_poses(self):
        w = small_world()
        obs = w.observation()
        assert len(obs) == 3
        cup = next(o for o in obs if o["name"] == "cup")
        assert cup["x"] == 0.5 and cup["y"] == 0.5 and cup["z_level"] == 0

    def test_stacked_glyph_order_and_badge(self):
        w = World(
            {"B": disc(0.5, 0.5, r=0.05), "A": ObjPose(0.5, 0.5, z_level=1, support="B")},
            seed=0,
        )
        root = ET.fromstring(w.render_svg())
        glyphs = [e for e in root.iter() if e.get("class") == "obj"]
        assert [g.get("data-name") for g in glyphs] == ["B", "A"]  # A drawn above B
        badge = next(e for e in root.iter() if e.get("class") == "stack-badge")
        assert badge.text == "2" and badge.get("data-name") == "A"

    def test_ascii_render_mentions_objects(self):
        text = small_world().render_ascii()
        assert "C" in text and "." in text


class TestScenario:
    def test_load_packaged_blocks3(self):
        w = load_scenario(packaged_scenario_path("blocks3"))
        g = w.extract_eval_graph()
        assert ("Blue block", Relation.STACKED_ON, "Tray") in g.edges
        assert ("Red cup", Relation.NEAR, "Tray") in g.edges

    def test_seed_override(self):
        w = load_scenario(packaged_scenario_path("blocks5"), seed=99)
        assert w.seed == 99

    def test_grid_bijection(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x, y = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
            cell = cell_of(x, y)
            cx, cy = cell_center(cell)
            assert cell_of(cx, cy) == cell
