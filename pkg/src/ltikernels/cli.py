"""Command-line entry point: ``experiment``, ``identify`` and ``diagnose``.

Exit status is 0 on success, 1 when a numerical routine fails and 2 for
usage errors, unreadable or malformed files.
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .diagnostics import relative_degree_probe, stability_trend
from .errors import NumericalError, ParseError
from .experiment import ExperimentConfig, run_experiment, write_report
from .gram import GramMatrix
from .io import (
    read_dataset_csv,
    read_signal_csv,
    write_gram_csv,
    write_model_csv,
    write_table,
    write_weights_csv,
)
from .kernels import format_kernel_spec, parse_kernel_spec
from .mkl import KernelDictionary, fit_mkl, select_lambda_mkl
from .solver import IdentifiedModel, fit_model, select_lambda

EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def _fail(message: str, status: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(status)


def _guarded(func):
    """Map library exceptions onto exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FileNotFoundError as exc:
            _fail(f"file not found: {exc.filename}", EXIT_USAGE)
        except ParseError as exc:
            _fail(str(exc), EXIT_USAGE)
        except NumericalError as exc:
            _fail(f"numerical failure: {exc}", EXIT_NUMERICAL)
        except ValueError as exc:
            _fail(str(exc), EXIT_USAGE)

    return wrapper


def _grid(text: str, what: str, log_spaced: bool = False) -> np.ndarray:
    parts = text.split(",")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise click.BadParameter(f"expected 'lo,hi,n', got {text!r}", param_hint=what) from None
    if len(parts) != 3 or n < 1 or not hi >= lo or (log_spaced and not lo > 0):
        raise click.BadParameter(f"invalid grid {text!r}", param_hint=what)
    return np.geomspace(lo, hi, n) if log_spaced else np.linspace(lo, hi, n)


def _floats(text: str, what: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=what) from None


@click.group()
@click.option("-v", "--verbose", count=True, help="More log output (repeatable).")
def main(verbose):
    """Kernel-based identification of continuous-time LTI impulse responses."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="key = value config file; defaults reproduce the reference setup.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--curves/--no-curves", default=True, help="Write curve CSVs for the configured runs.")
@_guarded
def experiment(config_path, out_dir, curves):
    """Run the Monte Carlo comparison of r = 1 and r = 2 dictionaries."""
    config = ExperimentConfig.from_file(config_path) if config_path else ExperimentConfig()

    def progress(run, rows):
        scores = "  ".join(f"r={x.r}: fit_h={x.fit_h:7.2f} fit_y={x.fit_y:7.2f}" for x in rows)
        click.echo(f"run {run:3d}  {scores}", err=True)

    report = run_experiment(config, keep_curves=curves, progress=progress)
    out = Path(out_dir)
    write_report(report, out)
    (out / "config.txt").write_text("\n".join(config.to_lines()) + "\n", encoding="utf-8")
    click.echo(f"{'r':>2} {'score':>6} {'min':>9} {'q1':>9} {'median':>9} {'q3':>9} {'max':>9} {'n':>4}")
    for r, name, *stats, n in report.summary():
        click.echo(f"{r:>2} {name:>6} " + " ".join(f"{v:9.3f}" for v in stats) + f" {n:>4}")
    if report.excluded:
        click.echo(f"{len(report.excluded)} run(s) excluded after numerical failures", err=True)


@main.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), required=True,
              help="Piecewise-constant input, 't,level' CSV.")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), required=True,
              help="Measurements, 't,y' CSV.")
@click.option("--kernel", "kernels", multiple=True, required=True,
              help="Kernel spec; repeat to learn weights over a dictionary.")
@click.option("--lambda", "lam", type=float, default=None, help="Regularization parameter.")
@click.option("--gcv", is_flag=True, help="Select lambda by generalized cross validation.")
@click.option("--lambda-grid", default="1e-8,1e2,30", show_default=True,
              help="GCV grid 'lo,hi,n' (log-spaced).")
@click.option("--grid", default="0,1,201", show_default=True,
              help="Output curve grid 'lo,hi,n'.")
@click.option("--gram-csv", is_flag=True, help="Also write the Gram matrix as gram.csv.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@_guarded
def identify(input_path, data_path, kernels, lam, gcv, lambda_grid, grid, gram_csv, out_dir):
    """Fit one kernel (or a dictionary) to a dataset and write the estimates."""
    if (lam is None) == (not gcv):
        raise click.UsageError("give exactly one of --lambda and --gcv")
    if lam is not None and not lam > 0:
        raise click.BadParameter("must be positive", param_hint="--lambda")
    t_out = _grid(grid, "--grid")
    lam_grid = _grid(lambda_grid, "--lambda-grid", log_spaced=True) if gcv else None
    u = read_signal_csv(input_path)
    data = read_dataset_csv(data_path)
    specs = [parse_kernel_spec(k) for k in kernels]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if len(specs) == 1:
        model = fit_model(specs[0], u, data.times, data.values, lam if lam is not None else 1.0)
        if gcv:
            sel = select_lambda(model.gram, data.values, lam_grid)
            write_table(out / "gcv.csv", ("lambda", "score"), zip(sel.lambda_grid, sel.scores))
            model = fit_model(specs[0], u, data.times, data.values, sel.selected, gram=model.gram)
        kernel_text = format_kernel_spec(specs[0])
        extra = {}
    else:
        dictionary = KernelDictionary.build(specs, u, data.times)
        if gcv:
            sel, mkl = select_lambda_mkl(dictionary, data.values, lam_grid)
            write_table(out / "gcv.csv", ("lambda", "score"), zip(sel.lambda_grid, sel.scores))
            lam = sel.selected
        else:
            mkl = fit_mkl(dictionary, data.values, lam)
        write_weights_csv(out / "weights.csv", dictionary.omegas, mkl.d)
        model = IdentifiedModel(mkl.kernel(), u, data.times, mkl.c, lam, GramMatrix(mkl.gram(), data.times))
        kernel_text = " | ".join(format_kernel_spec(s) for s in specs)
        extra = {"weights": ",".join(f"{w:.17g}" for w in mkl.d)}

    write_model_csv(out / "model.csv", model.times, model.c, kernel_text, model.lam, extra)
    write_table(out / "h.csv", ("t", "h"), zip(t_out, model.impulse_response(t_out)))
    write_table(out / "y.csv", ("t", "y"), zip(t_out, model.predict(t_out)))
    if gram_csv:
        write_gram_csv(out / "gram.csv", model.gram.entries)
    click.echo(f"lambda = {model.lam:.6g}, {model.c.size} coefficients written to {out / 'model.csv'}")


@main.command()
@click.option("--kernel", "kernel_text", required=True, help="Kernel spec.")
@click.option("--horizons", default="5,10,20,40", show_default=True,
              help="Comma-separated increasing horizons for the l1 trend.")
@click.option("--t", "t_values", default="0.5,1,2", show_default=True,
              help="Section times for the relative-degree probe.")
@click.option("--max-order", default=4, show_default=True, type=int)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Write the stability curve here.")
@click.option("--degree-csv", type=click.Path(dir_okay=False), default=None,
              help="Write the relative-degree probes here.")
@_guarded
def diagnose(kernel_text, horizons, t_values, max_order, csv_path, degree_csv):
    """Stability trend and relative degree of a kernel."""
    spec = parse_kernel_spec(kernel_text)
    T = _floats(horizons, "--horizons")
    ts = _floats(t_values, "--t")
    rep = stability_trend(spec, T)
    probe_names = sorted(rep.probe_values)
    head = ["T", "l1", "lemma2"] + [f"probe_{n}" for n in probe_names]
    click.echo(" ".join(f"{h:>22}" for h in head))
    rows = []
    for i, t in enumerate(rep.horizons):
        row = [t, rep.l1_values[i], rep.lemma2_values[i]] + [rep.probe_values[n][i] for n in probe_names]
        rows.append(row)
        click.echo(" ".join(f"{v:22.15g}" for v in row))
    click.echo(f"verdict: {rep.verdict}")
    probes = [relative_degree_probe(spec, t, max_order) for t in ts]
    for p in probes:
        deg = "undetermined" if p.estimated_degree is None else str(p.estimated_degree)
        click.echo(f"relative degree at t={p.t:g}: {deg}")
    if csv_path:
        write_table(csv_path, head, rows)
    if degree_csv:
        write_table(
            degree_csv,
            ["t", "degree"] + [f"d{i}" for i in range(max_order + 1)],
            ([p.t, p.estimated_degree if p.estimated_degree is not None else -1, *p.derivative_estimates]
             for p in probes),
        )


if __name__ == "__main__":
    main()
