"""Command-line interface.

Exit codes: 0 success, 1 failure, 2 partial success (some requested methods
failed), 64 usage error.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .distributions import HalfNormal, SkewNormal, StandardNormal
from .errors import DomainError, FailsafeError
from .inference import (
    Bootstrap,
    cutoff_table,
    failsafe_test,
    model_variance,
    parse_method,
    _resolve_params,
)
from .io import AnalysisConfig, analyze, format_report, ingest
from .core import rosenthal_nr
from .simulation import (
    CoverageScenario,
    coverage_csv,
    figure_data_csv,
    run_grid,
)

EXIT_USAGE = 64

_DIST_NAMES = {
    "std-normal": StandardNormal(),
    "half-normal": HalfNormal(1.0),
    "skew-neg": SkewNormal(0.0, 1.0, -0.5),
    "skew-pos": SkewNormal(0.0, 1.0, 0.5),
}


def _parse_dist(name: str):
    if name in _DIST_NAMES:
        return _DIST_NAMES[name]
    if name.startswith("skew:"):
        return SkewNormal(0.0, 1.0, float(name[5:]))
    raise click.UsageError(
        f"unknown distribution {name!r}; choose from "
        f"{', '.join(_DIST_NAMES)} or skew:<delta>")


def _write_out(text: str, out: str | None) -> None:
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


@click.group()
def cli():
    """Fail-safe numbers for meta-analysis: estimates, confidence intervals,
    cutoff tables, and coverage simulations."""


@cli.command(name="analyze")
@click.argument("data", type=click.Path())
@click.option("--schema", type=click.Choice(["auto", "z", "effect-se"]),
              default="auto", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True,
              help="One-sided significance level of the fail-safe number.")
@click.option("--level", type=float, default=0.95, show_default=True,
              help="Two-sided confidence level of the intervals.")
@click.option("--method", "methods", multiple=True,
              help="Interval method token (repeatable); defaults to the five "
                   "standard estimators.")
@click.option("--boot-reps", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--flip-sign", is_flag=True,
              help="Negate every z (for effects oriented the other way).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "text"]),
              default="json", show_default=True)
@click.option("--out", type=str, default=None, help="Output path (default stdout).")
def analyze_cmd(data, schema, alpha, level, methods, boot_reps, seed,
                flip_sign, fmt, out):
    """Compute the fail-safe number and confidence intervals for a data file."""
    sample = ingest(data, schema=schema, alpha=alpha, flip_sign=flip_sign)
    kwargs = dict(alpha=alpha, level=level, seed=seed,
                  boot_replicates=boot_reps, output_format=fmt)
    if methods:
        kwargs["methods"] = tuple(methods)
    report, code = analyze(sample, AnalysisConfig(**kwargs))
    _write_out(format_report(report, fmt), out)
    return code


@cli.command(name="cutoffs")
@click.option("--k-max", type=int, default=160, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--model", "model_token", default="fixed-dist:half-normal:table",
              show_default=True, help="Variance model for the cutoff width.")
@click.option("--out", type=str, default=None, help="Output path (default stdout).")
def cutoffs_cmd(k_max, alpha, model_token, out):
    """Emit the table of fail-safe values that clear the 5k+10 rule."""
    if k_max < 1:
        raise click.UsageError("--k-max must be at least 1")
    rows = cutoff_table(k_max, alpha, parse_method(model_token))
    text = "k,cutoff\n" + "".join(f"{k},{c}\n" for k, c in rows)
    _write_out(text, out)
    return 0


@cli.command(name="simulate")
@click.option("--data-dist", required=True,
              help="std-normal | half-normal | skew-neg | skew-pos | skew:<delta>")
@click.option("--ci", "ci_tokens", multiple=True, required=True,
              help="CI method token (repeatable).")
@click.option("--k", "k_list", default="5,15,30,50", show_default=True,
              help="Comma-separated study counts.")
@click.option("--k-model", type=click.Choice(["fixed", "random"]),
              default="fixed", show_default=True)
@click.option("--k-draw", type=click.Choice(["nominal", "poisson"]),
              default="nominal", show_default=True,
              help="Random regime only: pin the count at its rate (matches "
                   "the reference study) or draw it each replicate.")
@click.option("--truth", default="auto", show_default=True,
              help="auto | data | std-normal | half-normal | skew-neg | skew-pos")
@click.option("--reps", type=int, default=2000, show_default=True)
@click.option("--boot-reps", type=int, default=500, show_default=True)
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--full-scale", is_flag=True,
              help="Allow full-scale bootstrap cells (10000 x 1000).")
@click.option("--out", type=str, default=None, help="Coverage CSV path (default stdout).")
@click.option("--plot-data", type=str, default=None,
              help="Also write long-format plot data to this path.")
def simulate_cmd(data_dist, ci_tokens, k_list, k_model, k_draw, truth, reps,
                 boot_reps, level, alpha, seed, workers, full_scale, out,
                 plot_data):
    """Run a coverage study and emit its results as CSV."""
    if reps < 100:
        raise click.UsageError("--reps must be at least 100")
    if boot_reps < 100:
        raise click.UsageError("--boot-reps must be at least 100")
    try:
        data = _parse_dist(data_dist)
        k_values = tuple(int(v) for v in k_list.split(",") if v.strip())
        if not k_values or any(k < 1 for k in k_values):
            raise click.UsageError("--k needs positive integers")
        truth_params = None
        if truth == "data":
            truth_params = data.moments()
        elif truth != "auto":
            truth_params = _parse_dist(truth).moments()
        methods = [parse_method(t, boot_reps) for t in ci_tokens]
    except (DomainError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc

    for m in methods:
        if isinstance(m, Bootstrap) and reps * m.replicates >= 10_000 * 1_000 \
                and not full_scale:
            raise click.UsageError(
                "bootstrap at this scale needs --full-scale")

    scenarios = [
        CoverageScenario(
            data_dist=data, ci_method=m, k_values=k_values, k_model=k_model,
            k_draw=k_draw, replicates=reps, boot_replicates=boot_reps,
            level=level, alpha=alpha, seed=seed, truth=truth_params)
        for m in methods
    ]
    reports = run_grid(scenarios, workers=workers)
    _write_out(coverage_csv(reports), out)
    if plot_data is not None:
        Path(plot_data).write_text(figure_data_csv(reports))

    failed = [r for r in reports if r.error]
    for r in failed:
        click.echo(f"scenario {r.ci_method} failed: {r.error}", err=True)
    redraws = sum(c.redraws for r in reports for c in r.cells)
    if redraws:
        click.echo(f"# redrew {redraws} degenerate study counts", err=True)
    return 2 if failed else 0


@cli.command(name="test")
@click.argument("data", type=click.Path())
@click.option("--schema", type=click.Choice(["auto", "z", "effect-se"]),
              default="auto", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--method", "method_token", default="fixed-dist:half-normal:table",
              show_default=True, help="Variance model for the test statistic.")
@click.option("--flip-sign", is_flag=True)
def test_cmd(data, schema, alpha, method_token, flip_sign):
    """Test whether the fail-safe number significantly exceeds 5k+10."""
    sample = ingest(data, schema=schema, alpha=alpha, flip_sign=flip_sign)
    est = rosenthal_nr(sample)
    model = parse_method(method_token)
    params = _resolve_params(model, sample, est.k)
    variance = model_variance(model, params, est.k, est.alpha).variance
    t = failsafe_test(est, variance, est.alpha)
    verdict = "reject: fail-safe number significantly exceeds 5k+10" \
        if t.reject else "fail to reject: not significantly above 5k+10"
    click.echo(f"n_r={est.n_r:.6g} threshold={est.rule_threshold:.6g} "
               f"statistic={t.statistic:.6g} critical={t.critical:.6g}")
    click.echo(verdict)
    return 0


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping exceptions onto the documented exit codes."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return 1
    except FailsafeError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
