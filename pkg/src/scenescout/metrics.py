"""Exploration metrics over transition logs.

States are canonical scene graphs (the ground-truth evaluation graphs when
the log carries them, falling back to the agent's own graphs otherwise) and
actions are canonical skill-sequence strings, so every metric is a pure
function of the persisted log. All logarithms are natural; values are nats.

Four metrics: the number of distinct graphs visited, the entropy of the
visit distribution, per-episode information gain over (state, action)
counts, and empowerment - the capacity of the empirical action-to-next-state
channel at a state, computed by Blahut-Arimoto iteration.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .memory import Transition
from .skills import serialize_sequence, serialize_skill

TELEPORT_LABEL = "teleport"
DEFAULT_MIN_SAMPLES = 2
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000


class MetricsError(Exception):
    pass


class EmptyLog(MetricsError):
    pass


class EpisodeOutOfRange(MetricsError):
    pass


class InsufficientData(MetricsError):
    pass


@dataclass
class VisitationStats:
    """Counts extracted from a transition log.

    ``states`` is the visited-state sequence (the first transition's start
    state, then every post-transition state). ``events`` pairs each
    transition's start state with its action identifier, in order.
    """

    states: list[str] = field(default_factory=list)
    events: list[tuple[str, str]] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)  # s' per event
    episode_bounds: list[int] = field(default_factory=lambda: [0, 0])
    teleport_flags: list[bool] = field(default_factory=list)

    @property
    def n_s(self) -> Counter:
        return Counter(self.states)

    @property
    def n_sa(self) -> Counter:
        return Counter(self.events)

    def channel_at(self, state: str, include_teleport: bool = False) -> dict[str, Counter]:
        """Empirical next-state counts per action taken at ``state``."""
        table: dict[str, Counter] = defaultdict(Counter)
        for (s, a), s_next, is_tp in zip(self.events, self.outcomes, self.teleport_flags):
            if s != state:
                continue
            if is_tp and not include_teleport:
                continue
            table[a][s_next] += 1
        return table

    def episodes(self) -> int:
        return len(self.episode_bounds) - 1

    @staticmethod
    def from_transitions(
        transitions: Sequence[Transition],
        use_eval_graphs: bool = True,
        per_skill_actions: bool = False,
        episode_length: Optional[int] = None,
    ) -> "VisitationStats":
        """Build stats from a log.

        ``per_skill_actions`` counts each skill of a step as its own action
        instead of the whole sequence. ``episode_length`` carves the run
        into fixed-length pseudo-episodes; by default the run is one
        episode.
        """

        def state_of(tr: Transition, which: str) -> str:
            g = getattr(tr, f"eval_{which}") if use_eval_graphs else None
            if g is None:
                g = getattr(tr, which)
            return g.canonical_key()

        stats = VisitationStats()
        for tr in transitions:
            s = state_of(tr, "before")
            s_next = state_of(tr, "after")
            if not stats.states:
                stats.states.append(s)
            if tr.actor == TELEPORT_LABEL:
                action = TELEPORT_LABEL
                is_tp = True
            elif per_skill_actions:
                action = None  # expanded below
                is_tp = False
            else:
                action = serialize_sequence(tr.skills)
                is_tp = False
            if per_skill_actions and not is_tp:
                for skill in tr.skills:
                    stats.events.append((s, serialize_skill(skill)))
                    stats.outcomes.append(s_next)
                    stats.teleport_flags.append(False)
            else:
                stats.events.append((s, action))
                stats.outcomes.append(s_next)
                stats.teleport_flags.append(is_tp)
            stats.states.append(s_next)

        n = len(stats.events)
        if episode_length and episode_length > 0:
            bounds = list(range(0, n, episode_length)) + [n]
            if bounds[-2] == n:
                bounds.pop()
        else:
            bounds = [0, n]
        stats.episode_bounds = bounds
        return stats


def unique_scene_graphs(stats: VisitationStats) -> int:
    return len(set(stats.states))


def growth_curve(stats: VisitationStats) -> list[tuple[int, int]]:
    """Cumulative distinct-state count after each visit (step 0 is the
    initial state). Non-decreasing by construction."""
    seen: set[str] = set()
    out = []
    for i, s in enumerate(stats.states):
        seen.add(s)
        out.append((i, len(seen)))
    return out


def state_entropy(stats: VisitationStats) -> float:
    """Entropy of the visit distribution, in nats; 0 log 0 counts as 0."""
    counts = stats.n_s
    total = sum(counts.values())
    if total == 0:
        raise EmptyLog("no visited states")
    h = 0.0
    for c in counts.values():
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    return h


def _cumulative_counts_through(stats: VisitationStats, episode: int) -> Counter:
    hi = stats.episode_bounds[episode]
    return Counter(stats.events[:hi])


def information_gain(stats: VisitationStats, episode: int) -> float:
    """Per-event information gain of one episode (1-based).

    Computes sum of log(1 + N_(s,a)) increments across the episode divided
    by the number of events; an empty episode yields 0 by the
    zero-denominator convention.
    """
    if episode < 1 or episode > stats.episodes():
        raise EpisodeOutOfRange(f"episode {episode} of {stats.episodes()}")
    before = _cumulative_counts_through(stats, episode - 1)
    after = _cumulative_counts_through(stats, episode)
    keys = set(before) | set(after)
    numerator = sum(
        math.log(1 + after.get(k, 0)) - math.log(1 + before.get(k, 0)) for k in keys
    )
    denominator = sum(after.values()) - sum(before.values())
    if denominator == 0:
        return 0.0
    return numerator / denominator


def blahut_arimoto(
    channel: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> tuple[float, np.ndarray]:
    """Capacity (nats) of a discrete memoryless channel, rows = p(s'|a).

    Alternating maximization over the input distribution; stops when the
    upper and lower capacity bounds agree within ``tol``. The lower bound is
    non-decreasing across iterations.
    """
    w = np.asarray(channel, dtype=float)
    if w.ndim != 2 or w.shape[0] < 1:
        raise ValueError("channel must be a 2-D row-stochastic array")
    row_sums = w.sum(axis=1)
    if not np.allclose(row_sums, 1.0):
        raise ValueError("channel rows must sum to 1")
    n = w.shape[0]
    p = np.full(n, 1.0 / n)
    lower = 0.0
    logw = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), 0.0)
    for _ in range(max_iter):
        q = p @ w
        with np.errstate(divide="ignore"):
            logq = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), 0.0)
        d = (w * (logw - logq)).sum(axis=1)  # per-action KL to the output mix
        c = np.exp(d)
        lower = float(np.log(p @ c))
        upper = float(np.log(c.max()))
        if upper - lower < tol:
            break
        p = p * c
        p = p / p.sum()
    return max(lower, 0.0), p


def empowerment(
    stats: VisitationStats,
    state: str,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    include_teleport: bool = False,
) -> float:
    """Capacity of the empirical action-to-next-state channel at ``state``."""
    table = stats.channel_at(state, include_teleport=include_teleport)
    if not table:
        raise InsufficientData(f"no recorded outcomes at state {state!r}")
    actions = sorted(table)
    outcomes = sorted({s for counts in table.values() for s in counts})
    w = np.zeros((len(actions), len(outcomes)))
    for i, a in enumerate(actions):
        total = sum(table[a].values())
        for j, s_next in enumerate(outcomes):
            w[i, j] = table[a][s_next] / total
    capacity, _p = blahut_arimoto(w, tol=tol, max_iter=max_iter)
    return capacity


def empowerment_report(
    stats: VisitationStats,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    include_teleport: bool = False,
) -> tuple[Optional[float], dict[str, float]]:
    """Per-state empowerment for states with at least ``min_samples``
    recorded outcomes, plus their mean (None when no state qualifies)."""
    per_state: dict[str, float] = {}
    for state in sorted({s for s, _a in stats.events}):
        table = stats.channel_at(state, include_teleport=include_teleport)
        samples = sum(sum(c.values()) for c in table.values())
        if samples < min_samples or not table:
            continue
        per_state[state] = empowerment(
            stats, state, tol=tol, max_iter=max_iter, include_teleport=include_teleport
        )
    mean = sum(per_state.values()) / len(per_state) if per_state else None
    return mean, per_state


def metrics_report(
    stats: VisitationStats,
    config_echo: Optional[dict] = None,
    min_samples: int = DEFAULT_MIN_SAMPLES,
) -> dict:
    """The full JSON report: unique graphs, entropy, IG per episode,
    empowerment summary, and an echo of the producing configuration."""
    try:
        entropy = state_entropy(stats)
    except EmptyLog:
        entropy = 0.0
    ig = [information_gain(stats, e) for e in range(1, stats.episodes() + 1)] if stats.events else []
    emp_mean, emp_per_state = empowerment_report(stats, min_samples=min_samples)
    return {
        "units": "nats",
        "unique": unique_scene_graphs(stats) if stats.states else 0,
        "entropy_nats": entropy,
        "ig_per_episode": ig,
        "empowerment_mean": emp_mean,
        "empowerment_per_state": emp_per_state,
        "visits": len(stats.states),
        "events": len(stats.events),
        "config": config_echo or {},
    }
