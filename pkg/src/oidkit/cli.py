"""Command line entry point.

    oid simulate    --config exp.toml [--seed N] [--out DIR] [--set k=v ...]
    oid learn       ...
    oid validate    ...
    oid reconstruct ...
    oid report      ...

Exit codes: 0 success, 1 usage error, 2 invalid config/data, 3 runtime failure.
"""

from __future__ import annotations

import sys

import click

from .config import ConfigError, load_config
from .matio import MatrixFileError
from .runner import COMMANDS, run_command

__all__ = ["main", "cli"]


def _stage_command(name: str):
    @click.command(name=name, help=f"Run the {name} stage of the pipeline.")
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False),
                  help="Experiment config file (TOML).")
    @click.option("--seed", type=int, default=None,
                  help="Override the master seed from the config.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                  help="Output directory (default: output.dir from the config).")
    @click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
                  help="Override a single config value (repeatable).")
    def command(config_path: str, seed: int | None, out_dir: str | None,
                overrides: tuple[str, ...]):
        cfg = load_config(config_path, overrides=overrides, seed=seed)
        run_command(name, cfg, out_dir if out_dir is not None else cfg.output.dir)
        click.echo(f"{name}: done")

    return command


@click.group()
def cli():
    """Learn inverse-problem design parameters from training pairs."""


for _name in COMMANDS:
    cli.add_command(_stage_command(_name))


def main(argv: list[str] | None = None) -> int:
    """Entry point with explicit exit-code mapping (0/1/2/3)."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:  # --help and friends
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except (ConfigError, MatrixFileError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # pragma: no cover - unexpected failure path
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
