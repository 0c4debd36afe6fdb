"""Command-line entry points: serve, inspect, replay, wipe.

Options resolve as flag > environment variable > default. Relevant
variables: HIERMEM_DATA_DIR, HIERMEM_LISTEN, HIERMEM_PROVIDER,
HIERMEM_AUTH_TOKEN, plus the remote-provider settings documented in
:mod:`hiermem.providers`.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import click

from .errors import HiermemError
from .evaluation import load_transcript, replay as run_replay, write_report
from .model import Config
from .persistence import load, snapshot_of, save, user_memory_path, wipe_user
from .providers import Provider, RemoteProvider, StubProvider
from .service import TIERS, create_app, tier_dump

_DEFAULT_LISTEN = "127.0.0.1:8077"
_DEFAULT_DATA_DIR = "./hiermem-data"


def _load_config(path: str | None) -> Config:
    if path is None:
        return Config()
    try:
        data = json.loads(Path(path).read_text("utf-8"))
        return Config.from_dict(data)
    except (OSError, json.JSONDecodeError, HiermemError) as exc:
        raise click.ClickException(f"could not load config {path}: {exc}")


def _make_provider(name: str, config: Config) -> Provider:
    if name == "stub":
        return StubProvider(dim=config.embedding_dim)
    try:
        return RemoteProvider()
    except HiermemError as exc:
        raise click.ClickException(str(exc))


def _resolve(flag: str | None, env: str, default: str) -> str:
    return flag or os.environ.get(env) or default


@click.group()
def main() -> None:
    """Tiered conversational memory engine."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file of engine settings.")
@click.option("--data-dir", default=None, help="Snapshot directory.")
@click.option("--listen", default=None, help="host:port to bind.")
@click.option("--provider", "provider_name", type=click.Choice(["stub", "remote"]),
              default=None, help="Model gateway to use.")
def serve(config_path: str | None, data_dir: str | None, listen: str | None,
          provider_name: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    config = _load_config(config_path)
    data_dir = _resolve(data_dir, "HIERMEM_DATA_DIR", _DEFAULT_DATA_DIR)
    listen = _resolve(listen, "HIERMEM_LISTEN", _DEFAULT_LISTEN)
    provider_name = _resolve(provider_name, "HIERMEM_PROVIDER", "stub")
    provider = _make_provider(provider_name, config)

    host, _, port_text = listen.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise click.ClickException(f"--listen expects host:port, got {listen!r}")

    app = create_app(
        config=config,
        provider=provider,
        data_dir=data_dir,
        auth_token=os.environ.get("HIERMEM_AUTH_TOKEN"),
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="info")


@main.command()
@click.argument("user_id")
@click.option("--tier", type=click.Choice(list(TIERS)), default=None,
              help="Single tier to dump; all three when omitted.")
@click.option("--data-dir", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--now", "now_override", type=int, default=None,
              help="Clock for heat values; defaults to the snapshot's save time.")
def inspect(user_id: str, tier: str | None, data_dir: str | None,
            config_path: str | None, now_override: int | None) -> None:
    """Print a read-only dump of a user's memory from disk."""
    config = _load_config(config_path)
    data_dir = _resolve(data_dir, "HIERMEM_DATA_DIR", _DEFAULT_DATA_DIR)
    path = user_memory_path(data_dir, user_id)
    if not path.exists():
        raise click.ClickException(f"no snapshot for user {user_id!r} under {data_dir}")
    try:
        snapshot = load(path)
    except HiermemError as exc:
        raise click.ClickException(str(exc))
    now = now_override if now_override is not None else snapshot.saved_at
    tiers = [tier] if tier else list(TIERS)
    dump = {name: tier_dump(snapshot.state, name, now, config) for name in tiers}
    if tier:
        dump = dump[tier]
    click.echo(json.dumps(dump, ensure_ascii=False, indent=2))


@main.command()
@click.option("--transcript", "transcript_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--provider", "provider_name", type=click.Choice(["stub", "remote"]),
              default="stub", show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Where to write the JSON report; stdout when omitted.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--data-dir", default=None,
              help="Also persist the rebuilt memory under this directory.")
@click.option("--user-id", default="replay", show_default=True)
def replay(transcript_path: str, provider_name: str, report_path: str | None,
           config_path: str | None, data_dir: str | None, user_id: str) -> None:
    """Rebuild memory from a transcript and score its QA items."""
    config = _load_config(config_path)
    provider = _make_provider(provider_name, config)
    try:
        transcript = load_transcript(transcript_path)
        result = run_replay(transcript, config=config, provider=provider, user_id=user_id)
    except HiermemError as exc:
        raise click.ClickException(str(exc))

    if report_path:
        write_report(result.report, report_path)
        click.echo(f"report written to {report_path}")
    else:
        click.echo(json.dumps(result.report.to_dict(), ensure_ascii=False, indent=2))

    if data_dir:
        last = transcript.turns[-1].timestamp if transcript.turns else 0
        saved_at = last + len(transcript.qa_items)
        target = save(snapshot_of(result.engine.state, saved_at=saved_at), data_dir)
        click.echo(f"memory snapshot written to {target}")


@main.command()
@click.argument("user_id")
@click.option("--data-dir", default=None)
@click.option("--yes", is_flag=True, help="Skip the confirmation prompt.")
def wipe(user_id: str, data_dir: str | None, yes: bool) -> None:
    """Delete a user's snapshot and archive."""
    data_dir = _resolve(data_dir, "HIERMEM_DATA_DIR", _DEFAULT_DATA_DIR)
    if not yes:
        click.confirm(f"Delete all memory for {user_id!r} under {data_dir}?", abort=True)
    if wipe_user(data_dir, user_id):
        click.echo(f"wiped {user_id}")
    else:
        click.echo(f"nothing stored for {user_id}")


if __name__ == "__main__":
    main()
