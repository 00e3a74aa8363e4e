"""Command-line interface for HPE Bench."""
from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Iterator, Optional

import typer

from hpe_bench.config import (
    ExperimentSpec,
    MethodSpec,
    Paths,
    SolverSettings,
    get_out_dir_from_env,
    load_experiment,
    parse_problem_string,
)
from hpe_bench.core.exceptions import ConfigError, HpeBenchError, ValidationError
from hpe_bench.core.file_io import atomic_write_text
from hpe_bench.core.generators import export_problem
from hpe_bench.core.logger import setup_logging
from hpe_bench.pipelines.bench import DEFAULT_EPS_BARS, run_bench
from hpe_bench.pipelines.experiment import run_experiment
from hpe_bench.pipelines.verify import verify_invariants

app = typer.Typer(help="Restart ACG, proximal bundle and baseline solvers with trace reports.")

EXIT_FAILURE = 1
EXIT_USAGE = 2


@contextmanager
def _exit_codes() -> Iterator[None]:
    """Map usage errors to exit code 2 and solver errors to exit code 1."""
    try:
        yield
    except ValidationError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=EXIT_USAGE)
    except HpeBenchError as e:
        typer.echo(f"Solver failed: {e}", err=True)
        raise typer.Exit(code=EXIT_FAILURE)


@app.callback()
def main(log_level: Optional[str] = None, log_file: Optional[Path] = None) -> None:
    """Configure logging before running a command."""
    if log_level is not None or log_file is not None:
        setup_logging(log_level=log_level or "INFO", log_file=log_file)


def _settings(**overrides: object) -> SolverSettings:
    return SolverSettings().merged(**overrides)


def _parse_eps_bars(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"--eps-bars must be comma separated numbers: {e}") from e


@app.command()
def solve(
    problem: str = "lasso",
    seed: int = 0,
    method: str = "restart_acg",
    lam: Optional[float] = typer.Option(None, "--lambda", help="Stepsize."),
    lambda_scale: Optional[float] = None,
    sigma: Optional[float] = None,
    delta: Optional[float] = None,
    eps_bar: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_inner: Optional[int] = None,
    max_iters: Optional[int] = None,
    out_dir: Optional[Path] = None,
) -> None:
    """Run one method on one generated problem and write its trace CSV."""
    with _exit_codes():
        if out_dir is None:
            out_dir = get_out_dir_from_env()
        settings = _settings(
            lam=lam,
            lambda_scale=lambda_scale,
            sigma=sigma,
            delta=delta,
            eps_bar=eps_bar,
            max_outer=max_outer,
            max_inner=max_inner,
            max_iters=max_iters,
        )
        spec = ExperimentSpec(
            problem=parse_problem_string(problem, seed=seed),
            methods=(MethodSpec(label=method, solver=method, settings=settings),),
            out_dir=out_dir,
        )
        summary = run_experiment(spec=spec)

    entry = summary["methods"][0]
    typer.echo(json.dumps({"reference": summary["reference"], **entry}, indent=2))
    if entry["error"] is not None:
        raise typer.Exit(code=EXIT_FAILURE)


@app.command()
def compare(
    experiment: Path,
    seed: Optional[int] = None,
    lam: Optional[float] = typer.Option(None, "--lambda", help="Stepsize for every method."),
    sigma: Optional[float] = None,
    delta: Optional[float] = None,
    eps_bar: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_inner: Optional[int] = None,
    max_workers: Optional[int] = None,
    out_dir: Optional[Path] = None,
) -> None:
    """Run every method of an experiment file; flags override file values."""
    with _exit_codes():
        spec = load_experiment(experiment, out_dir=out_dir)
        overrides = dict(
            lam=lam,
            sigma=sigma,
            delta=delta,
            eps_bar=eps_bar,
            max_outer=max_outer,
            max_inner=max_inner,
        )
        spec = replace(
            spec,
            problem=spec.problem if seed is None else replace(spec.problem, seed=seed),
            methods=tuple(
                replace(m, settings=m.settings.merged(**overrides)) for m in spec.methods
            ),
            max_workers=max_workers or spec.max_workers,
        )
        summary = run_experiment(spec=spec)

    typer.echo(json.dumps(summary, indent=2))
    if any(m["error"] is not None for m in summary["methods"]):
        raise typer.Exit(code=EXIT_FAILURE)


@app.command()
def verify(
    problem: str = "lasso:rows=80,cols=50,reg=0.1",
    seed: int = 0,
    method: str = "restart_acg",
    lam: Optional[float] = typer.Option(None, "--lambda", help="Stepsize."),
    lambda_scale: Optional[float] = None,
    sigma: Optional[float] = None,
    delta: Optional[float] = None,
    eps_bar: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_inner: Optional[int] = None,
    samples: int = 50,
    ppm_samples: int = 5,
    out_dir: Optional[Path] = None,
) -> None:
    """Run an instrumented solve and check every invariant; exit 1 on a violation."""
    with _exit_codes():
        if out_dir is None:
            out_dir = get_out_dir_from_env()
        settings = _settings(
            lam=lam,
            lambda_scale=lambda_scale,
            sigma=sigma,
            delta=delta,
            eps_bar=eps_bar,
            max_outer=max_outer,
            max_inner=max_inner,
        )
        report = verify_invariants(
            problem=parse_problem_string(problem, seed=seed),
            method=MethodSpec(label=method, solver=method, settings=settings),
            samples=samples,
            ppm_samples=ppm_samples,
        )
        text = json.dumps(report.to_dict(), indent=2)
        atomic_write_text(Paths(out_dir=out_dir).invariants_json, text + "\n")

    typer.echo(text)
    if not report.passed:
        raise typer.Exit(code=EXIT_FAILURE)


@app.command()
def bench(
    problem: str = "lasso:rows=80,cols=50,reg=0.1",
    seed: int = 0,
    eps_bars: str = ",".join(f"{e:g}" for e in DEFAULT_EPS_BARS),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Fixed stepsize."),
    sigma: Optional[float] = None,
    delta: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_inner: Optional[int] = None,
    out_dir: Optional[Path] = None,
) -> None:
    """Sweep eps_bar and write bench.csv with the work spent per point."""
    with _exit_codes():
        if out_dir is None:
            out_dir = get_out_dir_from_env()
        rows = run_bench(
            problem=parse_problem_string(problem, seed=seed),
            out_dir=out_dir,
            eps_bars=_parse_eps_bars(eps_bars),
            settings=_settings(
                lam=lam, sigma=sigma, delta=delta, max_outer=max_outer, max_inner=max_inner
            ),
        )

    typer.echo(
        json.dumps(
            [
                {
                    "eps_bar": r.eps_bar,
                    "lambda": r.lam,
                    "outer": r.outer,
                    "total_inner": r.total_inner,
                    "oracle_calls": r.oracle_calls,
                    "predicted": r.predicted,
                }
                for r in rows
            ],
            indent=2,
        )
    )


@app.command()
def generate(
    problem: str = "lasso",
    seed: int = 0,
    out_dir: Optional[Path] = None,
) -> None:
    """Export a generated problem instance in the matrix text format."""
    with _exit_codes():
        if out_dir is None:
            out_dir = get_out_dir_from_env()
        instance = parse_problem_string(problem, seed=seed).build()
        written = export_problem(instance, Paths(out_dir=out_dir).problem_dir)

    typer.echo(json.dumps({"problem": instance.name, "files": [str(p) for p in written]}, indent=2))


if __name__ == "__main__":
    app()
