"""Command-line interface.

Subcommands: ``run`` (execute a run), ``metrics`` (recompute reports from a
log, optionally rendering figures), ``replay`` (re-run from an audit log and
check equivalence), ``export`` (dataset export), and ``serve`` (operator
console service). Exit codes: 0 success, 1 configuration error, 2 runtime
failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .engine import (
    ConfigError,
    IncompleteRun,
    RunConfig,
    VARIANTS,
    export_dataset,
    load_config,
    recompute_metrics,
    replay as replay_run,
    run as run_engine,
    transitions_equal,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


@click.group()
def main():
    """Tabletop exploration workbench."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(), default=None, help="sectioned key-value config file")
@click.option("--scenario", default=None, help="scenario name or JSON path")
@click.option("--variant", type=click.Choice(VARIANTS), default=None)
@click.option("--backend", type=click.Choice(["remote", "scripted", "rule_based"]), default=None)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--script", type=click.Path(), default=None, help="scripted backend response file")
@click.option("--base-url", default=None, help="remote backend endpoint base URL")
@click.option("--model", default=None, help="remote backend model name")
@click.option("--describer-mode", type=click.Choice(["vlm", "ground_truth", "noisy_ground_truth"]), default=None)
@click.option("--p-fail", type=float, default=None)
@click.option("--episode-length", type=int, default=None)
def run_cmd(config_path, scenario, variant, backend, steps, seed, out, script,
            base_url, model, describer_mode, p_fail, episode_length):
    """Execute one exploration run and write its output tree."""
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
        overrides = {
            "scenario": scenario,
            "variant": variant,
            "backend": backend,
            "steps": steps,
            "seed": seed,
            "out": out,
            "script": script,
            "base_url": base_url,
            "model": model,
            "describer_mode": describer_mode,
            "p_fail": p_fail,
            "episode_length": episode_length,
        }
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        cfg.validate()
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        summary = run_engine(cfg)
    except Exception as err:  # runtime failures are exit code 2
        click.echo(f"run failed: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(json.dumps(summary.to_json(), indent=1))
    sys.exit(EXIT_OK)


@main.command("metrics")
@click.option("--log", "log_dir", type=click.Path(exists=True), required=True, help="run directory")
@click.option("--episode-length", type=int, default=None, help="segment the run into pseudo-episodes")
@click.option("--per-skill", is_flag=True, default=False, help="count each skill as its own action")
@click.option("--figures", is_flag=True, default=False, help="render figures next to the reports")
def metrics_cmd(log_dir, episode_length, per_skill, figures):
    """Recompute metrics reports (and optionally figures) from a log."""
    try:
        report = recompute_metrics(
            log_dir,
            episode_length=episode_length,
            per_skill_actions=per_skill or None,
        )
    except Exception as err:
        click.echo(f"metrics failed: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    if figures:
        from .report import render_figures

        for path in render_figures(log_dir):
            click.echo(f"wrote {path}", err=True)
    click.echo(json.dumps(report, indent=1, sort_keys=True))
    sys.exit(EXIT_OK)


@main.command("replay")
@click.option("--audit", "audit_path", type=click.Path(exists=True), required=True, help="audit.ndjson of a recorded run")
@click.option("--out", type=click.Path(), required=True)
def replay_cmd(audit_path, out):
    """Re-run a session from its audit log and verify equivalence."""
    try:
        summary = replay_run(audit_path, out)
    except IncompleteRun as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    except Exception as err:
        click.echo(f"replay failed: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    original = Path(audit_path).parent
    match = transitions_equal(original, out)
    click.echo(json.dumps({"summary": summary.to_json(), "transitions_match": match}, indent=1))
    sys.exit(EXIT_OK if match else EXIT_RUNTIME)


@main.command("export")
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True)
def export_cmd(run_dir):
    """Write dataset.ndjson from a completed run directory."""
    try:
        path = export_dataset(run_dir)
    except IncompleteRun as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    except Exception as err:
        click.echo(f"export failed: {err}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(str(path))
    sys.exit(EXIT_OK)


@main.command("serve")
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--scenario", default="blocks5")
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None, help="session log directory")
@click.option("--observer", is_flag=True, default=False, help="read-only session")
@click.option("--console", "console_dir", type=click.Path(), default=None, help="static console assets to serve at /console")
def serve_cmd(port, host, scenario, seed, out, observer, console_dir):
    """Serve the operator console API over HTTP."""
    try:
        import uvicorn

        from .service import create_app

        app = create_app(
            scenario=scenario,
            seed=seed,
            out=out,
            observer=observer,
            console_dir=console_dir,
        )
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
