"""Run orchestration: configuration, variants, output tree, dataset export,
and replay.

A run is fully determined by (scenario, variant, seed, backend script) for
the offline backends: independent seeded streams drive the world, the rule
planner, describer noise, and the random baseline, and all timestamps are
logical ticks, so two identical runs produce byte-identical output trees.

Output tree:
    manifest.json        config echo + seed + code version
    transitions.ndjson   the memory log (header line + one record per step)
    graphs.json          visited-graph catalog
    rejected.ndjson      steps that were refused before execution
    audit.ndjson         every backend call (prompt, hash, response)
    observations.ndjson  structured pre/post object lists per step
    metrics.json         exploration metrics report
    growth.csv           step -> cumulative unique graph count
    dataset.ndjson       downstream-training export with low-level actions
    svg/                 one render per recorded state
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .agents import AgentConfig, AgentLoop, RejectedStep
from .backends import (
    AuditLog,
    Backend,
    RemoteBackend,
    RuleBasedBackend,
    ScriptedBackend,
)
from .graphs import PLACEMENT_RELATIONS, Relation
from .memory import MemoryStore, Transition
from .metrics import VisitationStats, growth_curve, metrics_report
from .simulator import (
    DEFAULT_D_NEAR,
    DEFAULT_H_MAX,
    GRASP_CLEARANCE,
    GRASP_Z_OFFSET,
    DROP_HEIGHT_OFFSET,
    World,
    load_scenario,
    packaged_scenario_path,
)
from .skills import SkillCommand, arrange, grid_move, serialize_skill

VARIANT_FULL = "full"
VARIANT_NO_MEMORY = "no_memory"
VARIANT_NO_VERIFIER = "no_verifier"
VARIANT_RULE_EXPLORER = "rule_explorer"
VARIANT_RANDOM_TOOLS = "random_tools"
VARIANTS = (
    VARIANT_FULL,
    VARIANT_NO_MEMORY,
    VARIANT_NO_VERIFIER,
    VARIANT_RULE_EXPLORER,
    VARIANT_RANDOM_TOOLS,
)

BACKEND_KINDS = ("remote", "scripted", "rule_based")


class ConfigError(Exception):
    pass


class IncompleteRun(Exception):
    pass


@dataclass
class RunConfig:
    scenario: str = "blocks5"
    variant: str = VARIANT_FULL
    backend: str = "rule_based"
    steps: int = 50
    seed: int = 0
    out: Optional[str] = None
    # remote backend
    base_url: str = ""
    model: str = ""
    timeout: float = 120.0
    max_calls: Optional[int] = None
    # scripted backend
    script: str = ""
    # agents
    max_skills: int = 3
    verifier_window: int = 4
    max_verify_retries: int = 2
    describer_mode: str = "vlm"
    p_edge_flip: float = 0.0
    # simulator
    p_fail: float = 0.0
    d_near: float = DEFAULT_D_NEAR
    h_max: int = DEFAULT_H_MAX
    # memory
    tau: float = 4.0
    cap: int = 5
    # metrics
    episode_length: int = 0
    per_skill_actions: bool = False

    def validate(self) -> None:
        if self.steps < 1:
            raise ConfigError("--steps must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"--variant must be one of {', '.join(VARIANTS)}")
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(f"--backend must be one of {', '.join(BACKEND_KINDS)}")
        if self.backend == "remote" and not self.base_url:
            raise ConfigError("remote backend needs base_url")
        if self.backend == "scripted" and not self.script:
            raise ConfigError("scripted backend needs script")
        if self.out is None:
            raise ConfigError("--out is required")
        out = Path(self.out)
        if out.exists() and any(out.iterdir()):
            raise ConfigError(f"--out directory {out} is not empty")

    def to_manifest(self) -> dict:
        # the output path is wherever the manifest sits; echoing it would
        # make otherwise-identical runs compare unequal
        config = {k: v for k, v in asdict(self).items() if k != "out"}
        return {
            "code_version": __version__,
            "config": config,
        }

    @staticmethod
    def from_manifest(manifest: dict) -> "RunConfig":
        return RunConfig(**manifest["config"])


_INI_SECTIONS = {
    "run": ("scenario", "variant", "backend", "steps", "seed", "out"),
    "backend": ("base_url", "model", "timeout", "max_calls", "script"),
    "agents": (
        "max_skills",
        "verifier_window",
        "max_verify_retries",
        "describer_mode",
        "p_edge_flip",
    ),
    "simulator": ("p_fail", "d_near", "h_max"),
    "memory": ("tau", "cap"),
    "metrics": ("episode_length", "per_skill_actions"),
}


def load_config(path: Path | str) -> RunConfig:
    """Read the sectioned key-value config file; missing keys keep their
    defaults."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    for section, keys in _INI_SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key in keys:
            if not parser.has_option(section, key):
                continue
            raw = parser.get(section, key)
            current = getattr(cfg, key)
            if isinstance(current, bool):
                setattr(cfg, key, parser.getboolean(section, key))
            elif isinstance(current, int) and current is not None:
                setattr(cfg, key, parser.getint(section, key))
            elif isinstance(current, float):
                setattr(cfg, key, parser.getfloat(section, key))
            else:
                setattr(cfg, key, raw)
    if parser.has_option("backend", "max_calls"):
        cfg.max_calls = parser.getint("backend", "max_calls")
    return cfg


def build_world(cfg: RunConfig) -> World:
    path = packaged_scenario_path(cfg.scenario)
    return load_scenario(
        path, seed=cfg.seed, p_fail=cfg.p_fail, d_near=cfg.d_near, h_max=cfg.h_max
    )


def build_backend(cfg: RunConfig, world: World, audit: AuditLog) -> Backend:
    if cfg.backend == "remote":
        return RemoteBackend(
            cfg.base_url,
            model=cfg.model,
            timeout=cfg.timeout,
            audit=audit,
            max_calls=cfg.max_calls,
        )
    if cfg.backend == "scripted":
        return ScriptedBackend.from_file(cfg.script, audit=audit, max_calls=cfg.max_calls)
    return RuleBasedBackend(
        world,
        rng=np.random.default_rng([cfg.seed, 1]),
        audit=audit,
        max_calls=cfg.max_calls,
    )


def enumerate_valid_commands(world: World) -> list[SkillCommand]:
    """The valid command space for the uniform random baseline: exposed
    subjects, in-bounds collision-free placements."""
    from .grid import all_cells, cell_center
    from .simulator import OutOfBoundsError, TargetStackFull

    names = world.catalog()
    tops = [n for n in names if not world.objects_above(n)]
    commands: list[SkillCommand] = []
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
                try:
                    x, y, z = world.compute_drop_point(subject, rel, target)
                except (OutOfBoundsError, TargetStackFull):
                    continue
                if z == 0 and not world._spot_is_clear(subject, x, y):
                    continue
                commands.append(SkillCommand("relation_move", subject, rel, target))
        for cell in all_cells():
            x, y = cell_center(cell, world.bounds)
            if not world.bounds.contains(x, y, inset=world.objects[subject].footprint.bound):
                continue
            if not world._spot_is_clear(subject, x, y):
                continue
            commands.append(grid_move(subject, cell))
        if world.free_cells(subject):
            commands.append(arrange(subject))
    return commands


@dataclass
class RunSummary:
    out: str
    steps_completed: int
    steps_rejected: int
    unique_graphs: int
    entropy_nats: float

    def to_json(self) -> dict:
        return asdict(self)


class _RunContext:
    """Shared output-tree plumbing for one run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "svg").mkdir(exist_ok=True)
        manifest = cfg.to_manifest()
        (self.out / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
        )
        self.world = build_world(cfg)
        self.store = MemoryStore(self.out, tau=cfg.tau, cap=cfg.cap)
        self.audit = AuditLog(self.out / "audit.ndjson")
        self.rejected_path = self.out / "rejected.ndjson"
        self.observations_path = self.out / "observations.ndjson"
        self.rejected = 0
        self.render_state(0)

    def render_state(self, index: int) -> str:
        rel = f"svg/step_{index:04d}.svg"
        (self.out / rel).write_text(self.world.render_svg(), encoding="utf-8")
        return rel

    def note_rejection(self, rejection: RejectedStep) -> None:
        self.rejected += 1
        with open(self.rejected_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rejection.to_json(), sort_keys=True) + "\n")

    def note_observation(self, index: int, pre: list, post: list) -> None:
        with open(self.observations_path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps({"step": index, "pre": pre, "post": post}, sort_keys=True)
                + "\n"
            )

    def finish(self) -> RunSummary:
        stats = VisitationStats.from_transitions(
            self.store.transitions,
            per_skill_actions=self.cfg.per_skill_actions,
            episode_length=self.cfg.episode_length or None,
        )
        report = metrics_report(stats, config_echo=self.cfg.to_manifest()["config"])
        (self.out / "metrics.json").write_text(
            json.dumps(report, indent=1, sort_keys=True), encoding="utf-8"
        )
        write_growth_csv(self.out / "growth.csv", stats)
        self.store.close()
        export_dataset(self.out)
        return RunSummary(
            out=str(self.out),
            steps_completed=len(self.store.transitions),
            steps_rejected=self.rejected,
            unique_graphs=report["unique"],
            entropy_nats=report["entropy_nats"],
        )


def write_growth_csv(path: Path, stats: VisitationStats) -> None:
    rows = ["step,unique_graphs"]
    rows += [f"{step},{count}" for step, count in growth_curve(stats)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def run(cfg: RunConfig) -> RunSummary:
    """Execute one run of the selected variant and write the output tree."""
    cfg.validate()
    ctx = _RunContext(cfg)
    if cfg.variant == VARIANT_RANDOM_TOOLS:
        _run_random_tools(ctx)
    else:
        _run_agentic(ctx)
    return ctx.finish()


def _agent_config(cfg: RunConfig) -> AgentConfig:
    return AgentConfig(
        max_skills=cfg.max_skills,
        verifier_window=cfg.verifier_window,
        max_verify_retries=cfg.max_verify_retries,
        describer_mode=cfg.describer_mode,
        p_edge_flip=cfg.p_edge_flip,
        use_memory=cfg.variant != VARIANT_NO_MEMORY,
        use_verifier=cfg.variant != VARIANT_NO_VERIFIER,
    )


def _run_agentic(ctx: _RunContext) -> None:
    cfg = ctx.cfg
    main = build_backend(cfg, ctx.world, ctx.audit)
    backends = {"describer": main, "explorer": main, "verifier": main}
    # the mixed wiring only applies against a live remote model; scripted
    # replays must serve every role from the recorded script
    if cfg.variant == VARIANT_RULE_EXPLORER and main.kind == "remote":
        backends["explorer"] = RuleBasedBackend(
            ctx.world, rng=np.random.default_rng([cfg.seed, 1]), audit=ctx.audit
        )
    loop = AgentLoop(
        ctx.world,
        ctx.store,
        backends,
        _agent_config(cfg),
        noise_rng=np.random.default_rng([cfg.seed, 2]),
    )
    for _step in range(cfg.steps):
        pre_obs = ctx.world.observation()
        result = loop.step()
        if isinstance(result, Transition):
            ctx.render_state(len(ctx.store.transitions))
            ctx.note_observation(result.index, pre_obs, ctx.world.observation())
        else:
            ctx.note_rejection(result)


def _run_random_tools(ctx: _RunContext) -> None:
    """Uniform sampling over the valid command space, one command per step,
    with no describing, planning, or verification."""
    cfg = ctx.cfg
    rng = np.random.default_rng([cfg.seed, 3])
    for step in range(cfg.steps):
        commands = enumerate_valid_commands(ctx.world)
        if not commands:
            break
        skill = commands[int(rng.integers(len(commands)))]
        pre_obs = ctx.world.observation()
        eval_before = ctx.world.extract_eval_graph()
        outcome = ctx.world.execute_skill(skill)
        eval_after = ctx.world.extract_eval_graph()
        tr = Transition(
            index=len(ctx.store.transitions),
            before=eval_before,
            skills=[skill],
            after=eval_after,
            outcomes=[outcome.to_json()],
            eval_before=eval_before,
            eval_after=eval_after,
            tick=step,
            actor="random",
        )
        ctx.store.record(tr)
        ctx.render_state(len(ctx.store.transitions))
        ctx.note_observation(tr.index, pre_obs, ctx.world.observation())


# ---------------------------------------------------------------------------
# Dataset export
# ---------------------------------------------------------------------------


def _low_level_actions(tr: Transition) -> list[dict]:
    """Per-skill low-level action parameters for the dataset export: pick
    pose, lift clearance, grasp descent offset, place pose, and the stack
    drop offset when releasing onto a stack."""
    actions = []
    for skill, outcome in zip(tr.skills, tr.outcomes):
        moved = {m["name"]: m for m in outcome.get("moved", [])}
        subject = skill.subject
        entry = {
            "skill": serialize_skill(skill),
            "status": outcome.get("status"),
            "note": outcome.get("note", ""),
            "clearance": GRASP_CLEARANCE,
            "z_offset": GRASP_Z_OFFSET,
            "pick": None,
            "place": None,
            "drop_offset": None,
        }
        if subject in moved:
            old, new = moved[subject]["old"], moved[subject]["new"]
            entry["pick"] = {"x": old["x"], "y": old["y"], "z_level": old["z_level"]}
            entry["place"] = {"x": new["x"], "y": new["y"], "z_level": new["z_level"]}
            if new["z_level"] > 0:
                entry["drop_offset"] = DROP_HEIGHT_OFFSET
        actions.append(entry)
    return actions


def export_dataset(run_dir: Path | str) -> Path:
    """Write dataset.ndjson from a completed run directory."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    transitions_path = run_dir / "transitions.ndjson"
    if not manifest_path.exists() or not transitions_path.exists():
        raise IncompleteRun(f"{run_dir} lacks manifest.json or transitions.ndjson")
    manifest_hash = hashlib.sha256(manifest_path.read_bytes()).hexdigest()

    observations: dict[int, dict] = {}
    obs_path = run_dir / "observations.ndjson"
    if obs_path.exists():
        for line in obs_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = json.loads(line)
                observations[rec["step"]] = rec

    store = MemoryStore.load(run_dir)
    store.close()
    out_path = run_dir / "dataset.ndjson"
    with open(out_path, "w", encoding="utf-8") as fh:
        for tr in store.transitions:
            obs = observations.get(tr.index, {})
            record = {
                "schema": "scenescout.dataset/1",
                "step": tr.index,
                "actor": tr.actor,
                "pre": {
                    "objects": obs.get("pre"),
                    "svg": f"svg/step_{tr.index:04d}.svg",
                },
                "post": {
                    "objects": obs.get("post"),
                    "svg": f"svg/step_{tr.index + 1:04d}.svg",
                },
                "graphs": {
                    "before": tr.to_json()["before"],
                    "after": tr.to_json()["after"],
                    "eval_before": tr.to_json()["eval_before"],
                    "eval_after": tr.to_json()["eval_after"],
                },
                "skills": tr.to_json()["skills"],
                "skill_lines": tr.to_json()["skill_lines"],
                "actions": _low_level_actions(tr),
                "outcomes": tr.outcomes,
                "success": all(o.get("status") == "Success" for o in tr.outcomes),
                "manifest_hash": manifest_hash,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return out_path


# ---------------------------------------------------------------------------
# Metrics recompute and replay
# ---------------------------------------------------------------------------


def recompute_metrics(
    run_dir: Path | str,
    episode_length: Optional[int] = None,
    per_skill_actions: Optional[bool] = None,
    write: bool = True,
) -> dict:
    """Rebuild the metrics report from a persisted log (pure function of
    the files on disk)."""
    run_dir = Path(run_dir)
    store = MemoryStore.load(run_dir)
    store.close()
    manifest = {}
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8")).get("config", {})
    if episode_length is None:
        episode_length = manifest.get("episode_length", 0) or None
    if per_skill_actions is None:
        per_skill_actions = bool(manifest.get("per_skill_actions", False))
    stats = VisitationStats.from_transitions(
        store.transitions,
        per_skill_actions=per_skill_actions,
        episode_length=episode_length,
    )
    report = metrics_report(stats, config_echo=manifest)
    if write:
        (run_dir / "metrics.json").write_text(
            json.dumps(report, indent=1, sort_keys=True), encoding="utf-8"
        )
        write_growth_csv(run_dir / "growth.csv", stats)
    return report


def replay(audit_path: Path | str, out: Path | str) -> RunSummary:
    """Re-run a recorded session by replaying its audit log through the
    scripted backend, using the original manifest's configuration."""
    audit_path = Path(audit_path)
    manifest_path = audit_path.parent / "manifest.json"
    if not manifest_path.exists():
        raise IncompleteRun(f"no manifest.json beside {audit_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cfg = RunConfig.from_manifest(manifest)
    cfg.backend = "scripted"
    cfg.script = str(audit_path)
    cfg.out = str(out)
    return run(cfg)


def transitions_equal(dir_a: Path | str, dir_b: Path | str) -> bool:
    """Compare two runs' transition logs record-by-record (ignoring the
    header, which echoes configuration)."""
    a = MemoryStore.load(dir_a)
    b = MemoryStore.load(dir_b)
    a.close()
    b.close()
    return [t.to_json() for t in a.transitions] == [t.to_json() for t in b.transitions]
