"""Command-line front end.

Every command writes one JSON report into ``--out-dir`` (atomically) and prints
its path.  Exit codes: 0 success, 1 usage/parse/precondition errors, 2 a
mathematical assertion failed (ordering violation, certificate failure,
solver non-convergence, infeasible normalization).
"""

from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

import click

from . import serialize
from .config import Config
from .constants import (
    KINDS,
    SearchStrategy,
    box_constant,
    carleson_constant,
    embedding_constant,
    hereditary_constant,
    ordering_report,
    rec_constant,
)
from .constructive import (
    build_embedding_majorant,
    build_truncated_majorant,
    equilibrium_measure,
    kkt_residuals,
    peel_measure,
)
from .constructive.majorants import DEFAULT_THETA
from .errors import CertificateError, ConvergenceError, DyadicError, GeneratorError
from .experiments import EXPERIMENTS, GeneratorSpec, gen_random_measure
from .geometry import BiTreeGeometry, BoundarySet, build_tree
from .hardy import energy, potential

EXIT_OK, EXIT_USAGE, EXIT_MATH = 0, 1, 2
_MATH_ERRORS = (CertificateError, ConvergenceError, GeneratorError)

# Tunable per-experiment parameters accepted from the "params" object of a spec file.
_EXPERIMENT_PARAMS = {
    "mass_decay": {"n_instances", "lambdas", "rec_limit"},
    "mutual_energy_split": {"n_instances", "trials", "rec_limit", "p_e", "thin"},
    "truncation_loss": {"n_instances", "deltas"},
    "level_set_capture": {"n_instances", "C32", "calibration_instances"},
    "rec_to_embedding": {"n_instances", "rec_limit", "tolerance"},
    "box_decay": {"n_instances"},
}


def _config(ctx) -> Config:
    return ctx.obj["config"]


def _envelope(ctx, command, inputs, result, status="ok"):
    return {"command": command, "config": _config(ctx).to_dict(), "input": inputs,
            "result": result, "status": status}


def _emit(ctx, name, report, csv_text=None):
    cfg = _config(ctx)
    path = serialize.atomic_write(Path(cfg.out_dir) / f"{name}.json", serialize.dumps(report))
    click.echo(str(path))
    if csv_text is not None and ctx.obj["csv"]:
        csv_path = serialize.atomic_write(Path(cfg.out_dir) / f"{name}.csv", csv_text)
        click.echo(str(csv_path))
    return path


def _strategy(ctx, method):
    cfg = _config(ctx)
    return SearchStrategy(method, restarts=cfg.restarts, seed=cfg.seed, max_exhaustive=cfg.max_exhaustive)


def _constants_csv(reports):
    rows = [{"kind": r.kind, "value": r.value, "method": r.method} for r in reports]
    return serialize.rows_to_csv(["kind", "value", "method"], rows, ["columns: kind, value, method"])


_method_option = click.option(
    "--exhaustive", "method", flag_value="exhaustive",
    help="Enumerate all subsets (fails above --max-exhaustive support atoms).",
)
_search_option = click.option(
    "--local-search", "method", flag_value="local_search", help="Hill climbing with restarts (lower bounds)."
)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Root seed for all randomness.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Directory receiving reports.")
@click.option("--max-exhaustive", type=click.IntRange(min=1), default=None,
              help="Largest support enumerated exhaustively (default 20).")
@click.option("--tolerance", type=float, default=None,
              help="Overrides the spectral and equilibrium tolerances.")
@click.option("--csv", "csv_out", is_flag=True, help="Also write CSV tables where available.")
@click.pass_context
def cli(ctx, seed, out_dir, max_exhaustive, tolerance, csv_out):
    """Discrete potential theory on dyadic trees and bi-trees."""
    overrides = {"out_dir": out_dir}
    if seed is not None:
        overrides["seed"] = seed
    if max_exhaustive is not None:
        overrides["max_exhaustive"] = max_exhaustive
    if tolerance is not None:
        overrides["spectral_tolerance"] = tolerance
        overrides["equilibrium_tolerance"] = tolerance
    ctx.obj = {"config": Config(**overrides), "csv": csv_out, "seed_given": seed is not None}


@cli.command()
@click.argument("measure", type=click.Path(dir_okay=False))
@_method_option
@_search_option
@click.pass_context
def check(ctx, measure, method):
    """Compute all five constants and check their orderings."""
    mu = serialize.read_measure(measure)
    rep = ordering_report(mu, _strategy(ctx, method or "auto"), _config(ctx).spectral_tolerance)
    status = "ok" if rep.ok else "violation"
    _emit(ctx, "check", _envelope(ctx, "check", {"measure": serialize.measure_to_dict(mu)},
                                  rep.to_dict(), status),
          _constants_csv(rep.constants.values()))
    for v in rep.violations:
        click.echo(f"violation: {v['name']} ({v['lhs']} vs {v['rhs']})", err=True)
    return EXIT_OK if rep.ok else EXIT_MATH


@cli.command()
@click.argument("measure", type=click.Path(dir_okay=False))
@click.option("--kind", "kinds", type=click.Choice(KINDS), multiple=True,
              help="Constants to compute (repeatable; default all).")
@_method_option
@_search_option
@click.pass_context
def constants(ctx, measure, kinds, method):
    """Compute selected constants with their witnesses."""
    mu = serialize.read_measure(measure)
    strategy = _strategy(ctx, method or "auto")
    funcs = {
        "box": lambda: box_constant(mu),
        "carleson": lambda: carleson_constant(mu, strategy),
        "rec": lambda: rec_constant(mu, strategy),
        "hereditary": lambda: hereditary_constant(mu, strategy),
        "embedding": lambda: embedding_constant(mu, _config(ctx).spectral_tolerance),
    }
    reports = [funcs[k]() for k in (kinds or KINDS)]
    result = {r.kind: r.to_dict() for r in reports}
    _emit(ctx, "constants", _envelope(ctx, "constants", {"measure": serialize.measure_to_dict(mu)}, result),
          _constants_csv(reports))
    return EXIT_OK


@cli.command()
@click.argument("measure", type=click.Path(dir_okay=False))
@click.option("--lambda", "lam", type=float, required=True, help="Level lambda.")
@click.option("--set", "set_file", type=click.Path(dir_okay=False), default=None,
              help="JSON index array for F (default: every boundary point where the potential reaches lambda).")
@click.option("--truncated", is_flag=True, help="Majorize the truncated potential.")
@click.option("--delta", type=float, default=1.0, show_default=True, help="Truncation level.")
@click.option("--theta", type=float, default=DEFAULT_THETA, show_default=True, help="Slice cut fraction.")
@click.option("--relaxed", is_flag=True, help="Only require theta*lambda > 1 instead of the default gate.")
@click.option("--phi-out", type=click.Path(dir_okay=False), default=None,
              help="Also write phi as a binary node function.")
@click.pass_context
def majorant(ctx, measure, lam, set_file, truncated, delta, theta, relaxed, phi_out):
    """Build a bi-tree majorant and re-verify its certified bounds."""
    mu = serialize.read_measure(measure)
    if not isinstance(mu.geometry, BiTreeGeometry):
        raise click.UsageError("majorant needs a bi-tree measure")
    g = mu.geometry
    if set_file is not None:
        F = serialize.read_set(set_file, g)
    else:
        field = potential(mu, delta if truncated else None)
        F = BoundarySet(g, field.boundary_values() >= lam)
    kwargs = {"theta": theta, "enforce_gate": not relaxed}
    if truncated:
        res = build_truncated_majorant(mu, F, lam, delta,
                                       eq_tolerance=_config(ctx).equilibrium_tolerance, **kwargs)
    else:
        res = build_embedding_majorant(mu, F, lam, **kwargs)
    if phi_out is not None:
        serialize.write_node_function(phi_out, res.phi)
    inputs = {"measure": serialize.measure_to_dict(mu), "lambda": lam, "F": serialize.set_to_list(F),
              "truncated": truncated, "delta": delta if truncated else None, "theta": theta,
              "relaxed": relaxed}
    _emit(ctx, "majorant", _envelope(ctx, "majorant", inputs, res.to_dict()))
    return EXIT_OK


@cli.command()
@click.argument("measure", type=click.Path(dir_okay=False))
@click.option("--C", "C", type=float, default=None, help="Energy ratio (default: energy / total mass).")
@click.pass_context
def peel(ctx, measure, C):
    """Strip low-potential layers so the rest has potential >= C/3 on its support."""
    mu = serialize.read_measure(measure)
    if C is None:
        total = mu.total
        if total == 0:
            raise click.UsageError("the zero measure needs an explicit --C")
        C = energy(mu).total / total
    res = peel_measure(mu, C, _config(ctx).identity_tolerance)
    _emit(ctx, "peel", _envelope(ctx, "peel", {"measure": serialize.measure_to_dict(mu), "C": C},
                                 res.to_dict()))
    return EXIT_OK


@cli.command()
@click.option("--depth", type=click.IntRange(min=0), required=True, help="Tree depth.")
@click.option("--set", "set_file", type=click.Path(dir_okay=False), required=True,
              help="JSON index array of boundary points.")
@click.pass_context
def equilibrium(ctx, depth, set_file):
    """Equilibrium measure of a boundary set on a tree, with KKT residuals."""
    tree = build_tree(depth)
    F = serialize.read_set(set_file, tree)
    rho = equilibrium_measure(F, _config(ctx).equilibrium_tolerance)
    res = kkt_residuals(rho, F)
    result = {"measure": serialize.measure_to_dict(rho), "capacity": rho.total,
              "residuals": dataclasses.asdict(res)}
    _emit(ctx, "equilibrium", _envelope(ctx, "equilibrium", {"depth": depth, "F": serialize.set_to_list(F)},
                                        result))
    return EXIT_OK


def _load_spec(ctx, spec_file):
    raw = serialize.read_json(spec_file) if spec_file else {"depth_x": 2, "depth_y": 2}
    if not isinstance(raw, dict):
        raise serialize.ParseError("spec must be a JSON object", source=spec_file)
    raw = dict(raw)
    params = raw.pop("params", {})
    if ctx.obj["seed_given"] or "seed" not in raw:
        raw["seed"] = _config(ctx).seed
    return GeneratorSpec.from_dict(raw, spec_file), params


@cli.command()
@click.argument("name")
@click.option("--spec", "spec_file", type=click.Path(dir_okay=False), default=None,
              help="Generator spec JSON, optionally with a 'params' object.")
@click.pass_context
def experiment(ctx, name, spec_file):
    """Run a registered experiment."""
    if name not in EXPERIMENTS:
        raise click.UsageError(f"unknown experiment {name!r}; choose from {', '.join(sorted(EXPERIMENTS))}")
    spec, params = _load_spec(ctx, spec_file)
    if not isinstance(params, dict):
        raise serialize.ParseError("'params' must be an object", source=spec_file)
    unknown = sorted(set(params) - _EXPERIMENT_PARAMS[name])
    if unknown:
        raise click.UsageError(f"{name} does not take {unknown}")
    if name == "mutual_energy_split" and "n_instances" in params:
        params = dict(params)
        params.setdefault("trials", params.pop("n_instances"))
        params.pop("n_instances", None)
    if name == "rec_to_embedding" and "rec_limit" not in params:
        params = {**params, "rec_limit": _config(ctx).max_exhaustive}
    report = EXPERIMENTS[name](spec, **params)
    report.config = _config(ctx).to_dict()
    _emit(ctx, f"experiment_{name}", report.to_dict(), report.to_csv())
    failed = [c.name for c in report.checks if not c.holds]
    for c in failed:
        click.echo(f"check failed: {c}", err=True)
    return EXIT_MATH if failed else EXIT_OK


@cli.command()
@click.option("--spec", "spec_file", type=click.Path(dir_okay=False), default=None,
              help="Generator spec JSON.")
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None,
              help="Measure file (default <out-dir>/measure.json).")
@click.pass_context
def gen(ctx, spec_file, out):
    """Generate a random measure file."""
    spec, _ = _load_spec(ctx, spec_file)
    mu = gen_random_measure(spec)
    path = out or Path(_config(ctx).out_dir) / "measure.json"
    click.echo(str(serialize.write_measure(path, mu)))
    return EXIT_OK


def main(argv=None) -> int:
    """Entry point returning the process exit code."""
    try:
        rv = cli.main(args=argv, prog_name="dyadic-potential", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except _MATH_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_MATH
    except DyadicError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return rv if isinstance(rv, int) else EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
