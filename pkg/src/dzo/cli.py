"""Command line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 validation failure,
3 runtime, IO or numerical error.
"""

from __future__ import annotations

import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import build_problem, canonical_json, config_hash, load_config, record_grid, sweep_seeds
from .errors import ConfigError, DZOError, NumericalError, ValidationFailure
from .hard import hard_check
from .metrics import aggregate_to_csv, aggregate_traces, fit_rate, read_csv_columns
from .optimizer import simulate
from .validate import ESTIMATOR_PROBES, MIXING_KINDS, SUITES, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


def _versions() -> dict:
    import scipy

    return {"dzo": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _manifest(cfg, seeds, hashes) -> str:
    doc = {"config": json.loads(canonical_json(cfg)), "seeds": seeds, "config_hashes": hashes,
           "versions": _versions()}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _simulate_chunk(args):
    cfg, seeds, hashes = args
    return simulate(build_problem(cfg), seeds, cfg.T, record_grid(cfg), hashes).traces


def _threads() -> int:
    raw = os.environ.get("DZO_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"DZO_THREADS must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError("DZO_THREADS must be >= 1")
    return k


def _emit(record: dict) -> None:
    click.echo(json.dumps(record, sort_keys=True))


@click.group()
@click.version_option(__version__, prog_name="dzo")
def cli():
    """Distributed zero-order stochastic optimisation experiments."""


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
              help="JSON experiment configuration.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Output directory for trace.csv and manifest.json.")
def run(config_path, out_dir):
    """Run one configured experiment and write its trace."""
    cfg = load_config(config_path)
    h = config_hash(cfg)
    trace = _simulate_chunk((cfg, [cfg.seed], [h]))[0]
    out = Path(out_dir)
    _write(out / "trace.csv", trace.to_csv())
    _write(out / "manifest.json", _manifest(cfg, [cfg.seed], [h]))
    click.echo(json.dumps({"trace": str(out / "trace.csv"), "config_hash": h, "rows": len(trace)}))


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seeds", "k", type=int, default=None, help="Number of seeds (seed, seed+1, ...).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def sweep(config_path, k, out_dir):
    """Run the experiment for several seeds; write per-seed traces and aggregate.csv."""
    cfg = load_config(config_path)
    seeds = sweep_seeds(cfg, k)
    hashes = [config_hash(cfg, seed=s) for s in seeds]
    workers = min(_threads(), len(seeds))
    chunks = [(cfg, seeds[i::workers], hashes[i::workers]) for i in range(workers)]
    if workers == 1:
        parts = [_simulate_chunk(chunks[0])]
    else:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_simulate_chunk, chunks))
    by_seed = {tr.seed: tr for part in parts for tr in part}
    traces = [by_seed[s] for s in seeds]      # fixed seed order for the reduction
    out = Path(out_dir)
    for tr in traces:
        _write(out / f"seed_{tr.seed}.csv", tr.to_csv())
    _write(out / "aggregate.csv", aggregate_to_csv(aggregate_traces(traces)))
    _write(out / "manifest.json", _manifest(cfg, seeds, hashes))
    click.echo(json.dumps({"out": str(out), "seeds": seeds}))


@cli.command()
@click.argument("suite", type=click.Choice(sorted(SUITES)))
@click.option("--beta", "betas", type=float, multiple=True,
              help="Smoothness values (kernel and estimator suites); repeatable.")
@click.option("--graph", "graphs", type=click.Choice(MIXING_KINDS), multiple=True,
              help="Graph families (mixing suite); repeatable.")
@click.option("--n", "ns", type=int, multiple=True, help="Node counts (mixing suite); repeatable.")
@click.option("--probe", "probes", type=click.Choice(ESTIMATOR_PROBES), multiple=True,
              help="Estimator probes to run; repeatable.")
@click.option("--n-mc", type=int, default=None, help="Monte-Carlo samples (estimator suite).")
@click.option("--seed", type=int, default=None, help="Seed for randomised checks.")
def validate(suite, betas, graphs, ns, probes, n_mc, seed):
    """Run a validation suite; one JSON line per check, exit 2 on any failure."""
    allowed = {"kernel": {"betas"}, "mixing": {"graphs", "ns", "seed"},
               "estimator": {"betas", "probes", "n_mc", "seed"}, "hard": set()}[suite]
    given = {"betas": betas, "graphs": graphs, "ns": ns, "probes": probes, "n_mc": n_mc, "seed": seed}
    kwargs = {}
    for name, value in given.items():
        if value is None or value == ():
            continue
        if name not in allowed:
            raise ConfigError(f"--{name.rstrip('s').replace('_', '-')} does not apply to the {suite} suite")
        key = {"graphs": "kinds", "ns": "n_range"}.get(name, name)
        kwargs[key] = value
    if any(n < 1 for n in ns):
        raise ConfigError("--n must be >= 1")
    if suite == "estimator" and "betas" in kwargs and any(b != int(b) or b < 2 for b in betas):
        raise ConfigError("estimator bias probes need integer beta >= 2")
    records = run_suite(suite, **kwargs)
    for rec in records:
        _emit(rec)
    failed = [r["check"] for r in records if not r["pass"]]
    _emit({"suite": suite, "summary": True, "checks": len(records), "failed": len(failed),
           "pass": not failed})
    if failed:
        raise ValidationFailure(f"{suite}: {len(failed)} check(s) failed: {', '.join(failed)}")


@cli.command()
@click.option("--csv", "csv_path", required=True, type=click.Path(dir_okay=False))
@click.option("--column", required=True)
@click.option("--tail", "tail_fraction", type=float, default=0.5, show_default=True)
def ratefit(csv_path, column, tail_fraction):
    """Fit a power law in t to the tail of one trace column."""
    try:
        text = Path(csv_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {csv_path}: {exc}") from exc
    try:
        cols = read_csv_columns(text)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{csv_path} is not a numeric CSV with a header row: {exc}") from exc
    if "t" not in cols:
        raise ConfigError(f"{csv_path} has no 't' column")
    fit = fit_rate(cols, column, tail_fraction)
    _emit({"column": column, "tail_fraction": tail_fraction, **fit.as_dict()})


@cli.group()
def hard():
    """Lower-bound instance utilities."""


@hard.command("check")
@click.option("--beta", type=float, required=True)
@click.option("--alpha", type=float, required=True)
@click.option("--T", "T", type=int, required=True)
@click.option("--d", type=int, required=True)
def hard_check_cmd(beta, alpha, T, d):
    """Integrity checks of one hard instance; exit 2 if any fails."""
    rep = hard_check(beta, alpha, T, d)
    _emit(rep)
    if not rep["pass"]:
        raise ValidationFailure("hard instance integrity check failed")


def main(argv=None) -> int:
    """Run the CLI and map failures onto the exit-code contract."""
    try:
        rv = cli.main(args=argv, prog_name="dzo", standalone_mode=False)
        code = rv if isinstance(rv, int) else EXIT_OK
    except click.exceptions.Exit as exc:
        code = exc.exit_code
    except click.ClickException as exc:  # usage errors and bad parameters
        exc.show()
        code = EXIT_CONFIG
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        code = EXIT_CONFIG
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        code = EXIT_CONFIG
    except ValidationFailure as exc:
        click.echo(f"validation failed: {exc}", err=True)
        code = EXIT_VALIDATION
    except (NumericalError, DZOError) as exc:
        click.echo(f"runtime error: {exc}", err=True)
        code = EXIT_RUNTIME
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        code = EXIT_RUNTIME
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
