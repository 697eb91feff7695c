"""Operator entry points: serve the playground API, batch-evaluate hints,
and record fixtures against a live provider.

Exit codes: 0 success, 1 invariant violations, 2 usage or configuration
error, 3 environment error (port in use, missing fixtures, provider down).
"""

from __future__ import annotations

import os
import socket
import sys
from pathlib import Path

import click

from . import evaluation, model
from .gateway import (MODE_LIVE, MODE_RECORD, MODE_REPLAY, ProviderConfig,
                      TOKEN_ENV)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3


def _load_pack_or_exit(task_pack: Path) -> list[model.TaskSpec]:
    try:
        pack = model.load_task_pack(task_pack)
    except (model.TaskPackError, OSError, ValueError) as exc:
        click.echo(f"error: cannot load task pack: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    report = model.validate_task_pack(pack)
    if not report.ok:
        for issue in report.issues:
            click.echo(f"error: task {issue.task_id}: {issue.message}", err=True)
        sys.exit(EXIT_USAGE)
    if not pack:
        click.echo("error: task pack is empty", err=True)
        sys.exit(EXIT_USAGE)
    return pack


@click.group()
def main() -> None:
    """Next-step hint engine for the teaching subset."""


@main.command()
@click.option("--task-pack", required=True, type=click.Path(path_type=Path))
@click.option("--port", default=8077, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", type=click.Path(path_type=Path), default=None)
@click.option("--provider-mode", default=MODE_REPLAY, show_default=True,
              type=click.Choice([MODE_REPLAY, MODE_RECORD, MODE_LIVE]))
@click.option("--fixtures", type=click.Path(path_type=Path), default=None)
@click.option("--endpoint", default=None, help="chat-completions URL (live/record)")
@click.option("--model", "model_name", default=None, help="provider model name")
@click.option("--playground-origin", default="*", show_default=True)
@click.option("--check", is_flag=True, hidden=True,
              help="validate configuration and exit without serving")
def serve(task_pack: Path, port: int, host: str, data_dir, provider_mode: str,
          fixtures, endpoint, model_name, playground_origin: str,
          check: bool) -> None:
    """Start the hint service for the playground UI."""
    from . import service

    _load_pack_or_exit(task_pack)
    if provider_mode == MODE_REPLAY and fixtures is None:
        click.echo("error: --provider-mode replay requires --fixtures", err=True)
        sys.exit(EXIT_USAGE)
    provider = ProviderConfig(mode=provider_mode, fixture_path=fixtures,
                              endpoint=endpoint, model=model_name)
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        probe.close()
    except OSError as exc:
        click.echo(f"error: cannot bind {host}:{port}: {exc}", err=True)
        sys.exit(EXIT_ENVIRONMENT)

    app = service.create_app(task_pack, provider, data_dir=data_dir,
                             playground_origin=playground_origin)
    if check:
        click.echo(f"configuration ok; would serve on {host}:{port}")
        return
    import uvicorn

    click.echo(f"serving on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("eval")
@click.option("--task-pack", required=True, type=click.Path(path_type=Path))
@click.option("--snapshots", required=True, type=click.Path(path_type=Path))
@click.option("--fixtures", required=True, type=click.Path(path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
def eval_command(task_pack: Path, snapshots: Path, fixtures: Path,
                 out: Path) -> None:
    """Replay the pipeline over a snapshot corpus and write reports."""
    pack = _load_pack_or_exit(task_pack)
    if not Path(snapshots).is_dir():
        click.echo(f"error: snapshot directory not found: {snapshots}", err=True)
        sys.exit(EXIT_USAGE)
    provider = ProviderConfig(mode=MODE_REPLAY, fixture_path=fixtures)
    corpus = evaluation.load_snapshots(snapshots)
    report = evaluation.run_corpus(pack, corpus, provider)
    json_path, csv_path = evaluation.write_reports(report, out)
    click.echo(f"wrote {json_path} and {csv_path} ({len(report.rows)} snapshots)")

    missing = report.missing_fingerprints
    if missing:
        click.echo("error: fixture misses for fingerprints:", err=True)
        for fingerprint in missing:
            click.echo(f"  {fingerprint}", err=True)
        sys.exit(EXIT_ENVIRONMENT)
    if report.invariant_violations:
        click.echo(f"error: {report.invariant_violations} invariant violations",
                   err=True)
        sys.exit(EXIT_VIOLATIONS)


@main.command()
@click.option("--task-pack", required=True, type=click.Path(path_type=Path))
@click.option("--snapshots", required=True, type=click.Path(path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="fixture output directory")
@click.option("--endpoint", required=True, help="chat-completions URL")
@click.option("--model", "model_name", required=True)
def record(task_pack: Path, snapshots: Path, out: Path, endpoint: str,
           model_name: str) -> None:
    """Run the pipeline against a live provider and store fixtures."""
    from . import pipeline

    if not os.environ.get(TOKEN_ENV):
        click.echo(f"error: {TOKEN_ENV} is not set", err=True)
        sys.exit(EXIT_USAGE)
    pack = _load_pack_or_exit(task_pack)
    tasks = model.task_index(pack)
    provider = ProviderConfig(mode=MODE_RECORD, fixture_path=out,
                              endpoint=endpoint, model=model_name)
    failures = 0
    for snapshot_id, snapshot in evaluation.load_snapshots(snapshots):
        task = tasks.get(snapshot.task_id)
        if task is None:
            click.echo(f"{snapshot_id}: unknown task, skipped", err=True)
            failures += 1
            continue
        try:
            outcome = pipeline.generate_hint(task, snapshot, provider)
        except Exception as exc:  # provider failures must not stop the run
            click.echo(f"{snapshot_id}: failed: {exc}", err=True)
            failures += 1
            continue
        status = "hint" if outcome.ok else outcome.no_hint_reason
        click.echo(f"{snapshot_id}: {status}")
    if failures:
        click.echo(f"error: {failures} snapshots failed; partial fixtures kept",
                   err=True)
        sys.exit(EXIT_ENVIRONMENT)


if __name__ == "__main__":
    main()
