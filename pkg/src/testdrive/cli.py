"""Command-line entry points: batch simulated runs, API server, reports.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import ConfigError, DataError, TestDriveError
from .ingest import load_detections, load_groundtruth, load_manifest
from .session import Session, SessionConfig, replay_session


@click.group()
def cli():
    """Estimate a detector's precision/recall with a human (or simulated) oracle."""


def _load_config(path: str | None) -> SessionConfig:
    if path is None:
        return SessionConfig()
    cfg, _ = SessionConfig.from_text(Path(path).read_text())
    return cfg


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--detections", "detections_path", required=True, type=click.Path(exists=True))
@click.option("--groundtruth", "groundtruth_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the config seed.")
def simulate(manifest_path, detections_path, groundtruth_path, config_path, out_dir, seed):
    """Run a full session with the simulated (ground-truth) oracle."""
    config = _load_config(config_path)
    overrides = {"oracle": "simulated"}
    if seed is not None:
        overrides["seed"] = seed
    config = SessionConfig(**{**config.__dict__, **overrides})
    manifest = load_manifest(manifest_path)
    detections = load_detections(detections_path, manifest)
    groundtruth = load_groundtruth(groundtruth_path, manifest)
    sources = {"manifest": manifest_path, "detections": detections_path,
               "groundtruth": groundtruth_path}
    session = Session(manifest, detections, config, groundtruth,
                      out_dir=out_dir, sources=sources)
    session.run_simulated()
    session.export_report()
    session.close()

    click.echo(f"{'gamma':>10} {'N':>6} {'K':>5} {'P_hat':>7} {'P_true':>7} "
               f"{'R_hat':>7} {'R_true':>7}")
    for g in session.sweep.gammas:
        r = session.estimate(g)
        tp, tr = session.true_pr(g)
        click.echo(f"{g:>10.4g} {r.n_detections:>6} {r.k:>5} {r.p_hat:>7.4f} "
                   f"{tp:>7.4f} {r.recall_hat:>7.4f} {tr:>7.4f}")
    click.echo(f"report written to {Path(out_dir) / 'report.csv'}")


@cli.command()
@click.option("--root", "root_dir", default=".", type=click.Path(exists=True, file_okay=False))
@click.option("--port", default=8765, type=int)
@click.option("--host", default="127.0.0.1")
def serve(root_dir, port, host):
    """Serve the labeling API (live human sessions; no ground-truth oracle)."""
    import uvicorn

    from .api import create_app

    try:
        uvicorn.run(create_app(root_dir), host=host, port=port, log_level="warning")
    except OSError as e:
        raise RuntimeError(f"cannot bind {host}:{port}: {e}") from e


@cli.command()
@click.option("--session", "session_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--plot", is_flag=True, help="Also write report.svg.")
def report(session_dir, plot):
    """Regenerate report.csv from a session directory by replaying its log."""
    session_dir = Path(session_dir)
    config, extra = SessionConfig.from_text((session_dir / "config").read_text())
    if "manifest" not in extra or "detections" not in extra:
        raise DataError(f"{session_dir / 'config'}: missing dataset source paths")
    manifest = load_manifest(extra["manifest"])
    detections = load_detections(extra["detections"], manifest)
    groundtruth = None
    if "groundtruth" in extra:
        groundtruth = load_groundtruth(extra["groundtruth"], manifest)
    session = replay_session(session_dir, manifest, detections, groundtruth)
    session.export_report(session_dir / "report.csv", plot=plot)
    click.echo(f"report written to {session_dir / 'report.csv'}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.exceptions.ClickException as e:
        e.show(file=sys.stderr)
        return 1
    except ConfigError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except (DataError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except (TestDriveError, RuntimeError) as e:
        click.echo(f"error: {e}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
