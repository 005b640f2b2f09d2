"""Command-line entry point: ips-lab <subcommand> --config FILE [--seed N] [--out DIR] [key=value ...]."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .experiments import RUNNERS, run
from .io import ConfigError, emit_plotdata, load_config, write_csv, write_grid_csv, write_jsonl


def _overrides(pairs):
    out = {}
    for p in pairs:
        if "=" not in p:
            raise click.BadParameter(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _execute(subcommand, config, seed, out, pairs):
    over = _overrides(pairs)
    if seed is not None:
        over["seed"] = str(seed)
    if out is not None:
        over["out"] = out
    try:
        cfg = load_config(subcommand, config, over)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    records = run(cfg)
    jsonl = out_dir / f"{cfg.experiment_id}.jsonl"
    jsonl.unlink(missing_ok=True)
    for rec in records:
        write_jsonl(rec, jsonl)
    write_csv(records, out_dir / f"{cfg.experiment_id}.csv")
    for rec in records:
        for name, (cols, data) in rec.grids.items():
            write_grid_csv(cols, data, out_dir / f"{cfg.experiment_id}.{name}.csv")
        if rec.grids:
            emit_plotdata(rec, "grid", out_dir)
        if any(k.endswith(".lhs") for k in rec.stats):
            emit_plotdata(rec, "duality", out_dir)
    ok = all(r.passed for r in records)
    for rec in records:
        for name, passed in rec.verdicts.items():
            click.echo(f"{'PASS' if passed else 'FAIL'}  {rec.experiment_id}  {name}")
    click.echo(f"{'all verdicts pass' if ok else 'some verdicts failed'}; outputs in {out_dir}")
    sys.exit(0 if ok else 1)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log solver diagnostics.")
def main(verbose):
    """Simulation and verification lab."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


def _make(name):
    @click.command(name=name, help=f"Run the {name} experiment (keys: see README).")
    @click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), default=None,
                  help="key=value config file")
    @click.option("--seed", type=int, default=None, help="master seed (overrides the config)")
    @click.option("--out", type=click.Path(file_okay=False), default=None, help="output directory")
    @click.argument("pairs", nargs=-1)
    def cmd(config, seed, out, pairs):
        _execute(name, config, seed, out, pairs)

    return cmd


for _name in RUNNERS:
    main.add_command(_make(_name))


if __name__ == "__main__":
    main()
