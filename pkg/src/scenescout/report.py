"""Figure rendering for run reports.

Consumes the delimited outputs a run already wrote (growth.csv,
metrics.json) and renders matplotlib figures next to them under
``figures/``. Kept separate from the run loop: runs emit data, this module
draws it.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_figures(run_dir: Path | str) -> list[Path]:
    """Render the unique-graph growth curve and a metric summary panel.

    Returns the written file paths. Requires growth.csv and metrics.json
    in the run directory.
    """
    run_dir = Path(run_dir)
    fig_dir = run_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    written: list[Path] = []

    growth_path = run_dir / "growth.csv"
    if growth_path.exists():
        steps, uniques = [], []
        with open(growth_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                steps.append(int(row["step"]))
                uniques.append(int(row["unique_graphs"]))
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(steps, uniques, lw=2, color="#4f7bb0")
        ax.set_xlabel("state visit")
        ax.set_ylabel("unique scene graphs")
        ax.set_title("Unique scene-graph growth")
        ax.grid(alpha=0.3)
        out = fig_dir / "growth.png"
        fig.tight_layout()
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)

    metrics_path = run_dir / "metrics.json"
    if metrics_path.exists():
        report = json.loads(metrics_path.read_text(encoding="utf-8"))
        labels = ["unique", "entropy (nats)"]
        values = [report.get("unique", 0), report.get("entropy_nats", 0.0)]
        if report.get("empowerment_mean") is not None:
            labels.append("empowerment (nats)")
            values.append(report["empowerment_mean"])
        if report.get("ig_per_episode"):
            labels.append("mean IG (nats)")
            values.append(sum(report["ig_per_episode"]) / len(report["ig_per_episode"]))
        fig, ax = plt.subplots(figsize=(6, 4))
        bars = ax.bar(range(len(values)), values, color="#d8713c")
        ax.set_xticks(range(len(labels)), labels, rotation=15, ha="right")
        ax.set_title("Exploration metrics")
        ax.bar_label(bars, fmt="%.3g")
        out = fig_dir / "metrics.png"
        fig.tight_layout()
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)

    return written
