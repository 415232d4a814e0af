"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure
(a non-converged prior fit under ``--strict``, or a failed lemma sweep).

Option precedence is flags > ``--config`` file > built-in defaults. The
config file is JSON keyed by subcommand, e.g. ``{"synth": {"runs": 500}}``.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .accesslog import (
    DataError,
    PopulationSpec,
    discretize,
    generate_log,
    load_dataset,
    read_log,
    save_dataset,
    serialize_log,
)
from .empirical_bayes import fit_dirichlet
from .real import RealConfig, pooled_user_counts, reports_to_csv, reports_to_json, run_real
from .rules import lemma1_sweep
from .synth import SynthConfig, run_synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class NumericError(click.ClickException):
    exit_code = EXIT_NUMERIC


class DataProblem(click.ClickException):
    exit_code = EXIT_DATA


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _load_config(ctx, param, value):
    if value is None:
        return None
    try:
        doc = json.loads(Path(value).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise click.BadParameter(f"config file not found: {value}") from None
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise click.BadParameter("config file must hold a JSON object")
    default_map = {}
    for cmd_name, opts in doc.items():
        cmd = ctx.command.commands.get(cmd_name)
        if cmd is None or not isinstance(opts, dict):
            raise click.BadParameter(f"config section {cmd_name!r} is not a subcommand table")
        aliases = {}
        for p in cmd.params:
            aliases[p.name] = p.name
            for opt in p.opts:
                if opt.startswith("--"):
                    aliases[opt[2:]] = p.name
                    aliases[opt[2:].replace("-", "_")] = p.name
        unknown = sorted(set(opts) - set(aliases))
        if unknown:
            raise click.BadParameter(f"unknown {cmd_name} option(s) in config: {', '.join(unknown)}")
        default_map[cmd_name] = {aliases[k]: v for k, v in opts.items()}
    ctx.default_map = default_map
    return value


seed_option = click.option("--seed", type=int, default=0, show_default=True, help="Random seed.")


@click.group()
@click.version_option(__version__, prog_name="bayesauth")
@click.option(
    "--config",
    type=click.Path(dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="JSON file with per-subcommand defaults.",
)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes for experiment runs.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.pass_context
def cli(ctx, threads, verbose):
    """Bayesian user authentication with pessimistic adversary models."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"threads": threads}


@cli.command()
@click.option("--runs", type=click.IntRange(min=1), default=10_000, show_default=True)
@click.option("--degree", "-K", type=click.IntRange(min=2), default=10, show_default=True)
@click.option("--length", "-n", "sequence_length", type=click.IntRange(min=1), default=10,
              show_default=True, help="Observations per test sequence.")
@click.option("--population", "population_size", type=click.IntRange(min=2), default=1000,
              show_default=True, help="Users drawn to fit the world model.")
@click.option("--enrollment", "enrollment_length", type=click.IntRange(min=0), default=None,
              help="Enrollment draws per user (default: --length).")
@click.option("--shape", "gamma_shape", type=float, default=1.0, show_default=True)
@click.option("--scale", "gamma_scale", type=float, default=1.0, show_default=True)
@click.option("--p-user", "p_user_prior", type=float, default=0.5, show_default=True)
@click.option("--replicates", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--share-prior", is_flag=True, help="Draw and fit the priors once for all runs.")
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Curve CSV.")
@click.option("--json-out", type=click.Path(dir_okay=False), help="Curve JSON.")
@click.pass_context
def synth(ctx, out, json_out, **kwargs):
    """Synthetic study: error rate per prefix length for every rule."""
    try:
        cfg = SynthConfig(**kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    curve = run_synthetic(cfg, workers=ctx.obj["threads"])
    _write(out, curve.to_csv())
    if json_out:
        _write(json_out, curve.to_json())
    n = cfg.sequence_length
    click.echo(f"{cfg.runs} runs, K={cfg.degree}, n={n}; error at t={n}:")
    for name in curve.rules:
        j = curve.rule_index(name)
        click.echo(f"  {name:8s} {curve.error_rate[j, -1]:.4f}  "
                   f"[{curve.lo[j, -1]:.4f}, {curve.hi[j, -1]:.4f}]")


@cli.command("gen-log")
@click.option("--users", "n_users", type=click.IntRange(min=1), default=882, show_default=True)
@click.option("--readers", "n_readers", type=click.IntRange(min=1), default=55, show_default=True)
@click.option("--days", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--mean-daily", "mean_daily_accesses", type=float, default=2.3, show_default=True)
@click.option("--groups", "n_groups", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--concentration", type=float, default=30.0, show_default=True)
@click.option("--group-concentration", type=float, default=5.0, show_default=True)
@click.option("--shared-profile", is_flag=True, help="Give every user the same profile.")
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Log CSV.")
def gen_log(days, seed, out, **kwargs):
    """Generate a synthetic access log."""
    try:
        spec = PopulationSpec(**kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    records = generate_log(spec, days, np.random.default_rng(seed))
    _write(out, serialize_log(records))
    click.echo(f"{len(records)} records, {spec.n_users} users, {spec.n_readers} readers, {days} days")


@cli.command()
@click.option("--in", "src", type=click.Path(dir_okay=False), required=True, help="Log CSV.")
@click.option("--readers", "readers_file", type=click.Path(dir_okay=False),
              help="File listing the reader ids, one per line (fixes layout and order).")
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Dataset file.")
def ingest(src, readers_file, seed, out):
    """Discretise an access log into per-user-day count vectors."""
    readers = None
    if readers_file:
        try:
            readers = [ln.strip() for ln in Path(readers_file).read_text().splitlines() if ln.strip()]
        except FileNotFoundError:
            raise DataProblem(f"reader list not found: {readers_file}") from None
    parsed = read_log(src, readers=readers)
    if not parsed.records:
        raise DataProblem(f"{src}: no usable records")
    ds = discretize(parsed.records, readers)
    save_dataset(ds, out)
    click.echo(f"{len(parsed.records)} records ({len(parsed.rejects)} rejected) -> "
               f"{ds.n_rows} user-days, {len(ds.user_ids())} users, K={ds.degree}")
    for line, raw, reason in parsed.rejects[:10]:
        click.echo(f"  rejected line {line}: {reason}", err=True)


@cli.command()
@click.option("--dataset", type=click.Path(dir_okay=False), required=True)
@click.option("--runs", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--reps", "reps_per_run", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--world-fraction", type=float, default=2 / 3, show_default=True)
@click.option("--min-records", "min_records_per_user", type=click.IntRange(min=2), default=10,
              show_default=True)
@click.option("--p-user", "p_user_prior", type=float, default=0.5, show_default=True)
@click.option("--rules", default="world,f_bias,p_bias", show_default=True,
              help="Comma-separated rule names.")
@click.option("--replicates", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--fit-unit", type=click.Choice(["user", "day"]), default="user", show_default=True)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Report CSV.")
@click.option("--json-out", type=click.Path(dir_okay=False), help="Report JSON.")
def real(dataset, rules, out, json_out, **kwargs):
    """Held-out-user protocol on a discretised dataset."""
    try:
        cfg = RealConfig(rules=tuple(r for r in rules.split(",") if r), **kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    ds = load_dataset(dataset)
    reports = run_real(ds, cfg)
    _write(out, reports_to_csv(reports))
    if json_out:
        _write(json_out, reports_to_json(reports, cfg))
    for name in cfg.rules:
        errs = [r.outcome(name).error_rate for r in reports]
        fp = sum(r.outcome(name).false_positives for r in reports)
        fn = sum(r.outcome(name).false_negatives for r in reports)
        ratio = f"{fp / fn:.3f}" if fn else "undefined"
        click.echo(f"  {name:8s} mean err {np.mean(errs):.4f}  FP/FN {ratio}")


@cli.command("verify-lemma")
@click.option("--trials", type=click.IntRange(min=0), default=10_000, show_default=True)
@click.option("--mixtures", type=click.IntRange(min=0), default=1_000, show_default=True)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), help="Summary JSON.")
def verify_lemma(trials, mixtures, seed, out):
    """Randomised check that self-conditioning never lowers the marginal likelihood."""
    res = lemma1_sweep(trials, mixtures, seed)
    if out:
        _write(out, json.dumps(res, indent=1, sort_keys=True) + "\n")
    click.echo(f"min gap {res['min_gap']:.3e} over {trials} Dirichlet and {mixtures} mixture cases")
    if not res["min_gap"] >= -1e-12:
        raise NumericError(f"lemma violated: min gap {res['min_gap']:.3e}")


@cli.command("fit-prior")
@click.option("--dataset", type=click.Path(dir_okay=False), required=True)
@click.option("--tolerance", type=float, default=1e-8, show_default=True)
@click.option("--max-iter", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--strict", is_flag=True, help="Exit 3 when the fit does not converge.")
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Prior JSON.")
def fit_prior(dataset, tolerance, max_iter, strict, seed, out):
    """Fit the world-model Dirichlet on every user's pooled counts."""
    ds = load_dataset(dataset)
    fit = fit_dirichlet(pooled_user_counts(ds, ds.user_ids()), tolerance, max_iter)
    doc = {
        "phi": fit.belief.phi.tolist(),
        "degree": fit.belief.degree,
        "readers": list(ds.readers),
        "iterations": fit.iterations,
        "final_relative_change": fit.final_relative_change,
        "converged": fit.converged,
    }
    _write(out, json.dumps(doc, sort_keys=True) + "\n")
    click.echo(f"K={fit.belief.degree} concentration {fit.belief.concentration:.4g} "
               f"after {fit.iterations} iterations (converged={fit.converged})")
    if strict and not fit.converged:
        raise NumericError("prior fit did not converge")


def main(argv=None) -> int:
    """Entry point returning the exit status instead of exiting."""
    try:
        cli.main(args=argv, prog_name="bayesauth", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
