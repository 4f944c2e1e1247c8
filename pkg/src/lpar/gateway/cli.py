"""`lpar` command line: serve, chat, agents, script."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import build_platform, load_config
from .repl import repl
from .script import run_script


def _resolve_app(config_path: str, app: str | None) -> str:
    return app or load_config(config_path).app.app_id


@click.group()
def main() -> None:
    """Multi-agent conversation platform."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--port", default=8000, type=int)
@click.option("--host", default="127.0.0.1")
def serve(config_path: str, data_dir: str | None, port: int, host: str) -> None:
    """Run the HTTP/WebSocket gateway."""
    from .http import serve_http

    platform = build_platform(config_path, data_dir)
    serve_http(platform, host=host, port=port)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--app", default=None)
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--user", default="cli-user")
def chat(config_path: str, app: str | None, data_dir: str | None, user: str) -> None:
    """Interactive REPL against the configured app."""
    platform = build_platform(config_path, data_dir)
    sys.exit(repl(platform, _resolve_app(config_path, app), user=user))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--app", default=None)
def agents(config_path: str, app: str | None) -> None:
    """List the app's registered agents and pods."""
    platform = build_platform(config_path)
    app_id = _resolve_app(config_path, app)
    rows = platform.registry.agents_of(app_id)
    click.echo(f"{'AGENT':<14} {'NAME':<36} {'TYPE':<6} {'CLASS':<16} {'STATUS':<8} {'RATING':<13} AVG MS")
    for d in sorted(rows, key=lambda d: d.agent_id):
        click.echo(
            f"{d.agent_id:<14} {d.name:<36} {d.node_type.value:<6} {d.agent_class.value:<16} "
            f"{d.status.value:<8} {d.rating.value:<13} {d.avg_response_time_ms:.1f}"
        )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--app", default=None)
@click.option("--file", "script_path", required=True, type=click.Path(exists=True))
@click.option("--data-dir", default=None, type=click.Path())
def script(config_path: str, app: str | None, script_path: str, data_dir: str | None) -> None:
    """Replay a transcript script; nonzero exit iff an assertion fails."""
    platform = build_platform(config_path, data_dir)
    lines = Path(script_path).read_text(encoding="utf-8").splitlines()
    ok = run_script(platform, _resolve_app(config_path, app), lines)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
