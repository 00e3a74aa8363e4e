"""Experiment pipeline: reference solve, method cells, trace CSVs and summary."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from hpe_bench.config import ExperimentSpec, MethodSpec, Paths, SolverSettings
from hpe_bench.core.baselines import BaselineConfig, fista_solve, subgradient_solve
from hpe_bench.core.bundle import BundleConfig, default_bundle_lambda, hpe_solve
from hpe_bench.core.exceptions import BudgetExhaustedError, HpeBenchError, ValidationError
from hpe_bench.core.file_io import atomic_write_text
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import CompositeProblem
from hpe_bench.core.reference import ReferenceSolution, get_cached_reference
from hpe_bench.core.restart_acg import RestartConfig, default_lambda, solve
from hpe_bench.core.types import TRACE_COLUMNS, RunStatus, RunTrace

logger = get_logger("experiment")

SUMMARY_GAPS = (1e-2, 1e-3, 1e-4)


@dataclass
class MethodOutcome:
    """Result of one method cell.

    Attributes:
        spec: The method cell.
        run: Trace (possibly partial), or None if the run never started.
        error: Error message when the cell failed.
        csv_path: Trace CSV written for the cell.
    """

    spec: MethodSpec
    run: RunTrace | None
    error: str | None = None
    csv_path: Path | None = None


def starting_point(problem: CompositeProblem) -> np.ndarray:
    """Return the origin, moved into dom h by one prox step if needed."""
    x0 = np.zeros(problem.dimension)
    if not math.isfinite(problem.h.value_at(x0)):
        x0 = problem.h.prox_at(x0, 1.0)
    return x0


def resolve_lambda(
    problem: CompositeProblem, settings: SolverSettings, d0: float
) -> float:
    """Pick the stepsize of a smooth or bundle method cell.

    Explicit ``lam`` wins, then ``lambda_scale / L`` for smooth problems, then
    the method default from d0 and eps_bar. With d0 = 0 the smallest
    admissible stepsize is used.

    Args:
        problem: Problem being solved.
        settings: Cell settings.
        d0: Distance from the start to the reference point.

    Returns:
        Stepsize.
    """
    if settings.lam is not None:
        return settings.lam
    if problem.is_smooth:
        L = problem.smooth_part.lipschitz_L
        if settings.lambda_scale is not None:
            return settings.lambda_scale / L
        return default_lambda(L, d0, settings.eps_bar) if d0 > 0 else 1.0 / L
    M = problem.nonsmooth_part.lipschitz_M
    if d0 > 0:
        return default_bundle_lambda(M, d0, settings.eps_bar)
    return settings.eps_bar / (M * M)


def run_method(
    problem: CompositeProblem,
    x0: np.ndarray,
    method: MethodSpec,
    reference: ReferenceSolution | None = None,
) -> RunTrace:
    """Run one method cell.

    Args:
        problem: Problem to solve.
        x0: Starting point.
        method: Cell to run.
        reference: Reference solution; drives the stopping tests and d0.

    Returns:
        RunTrace of the run.

    Raises:
        ValidationError: If the method does not fit the problem kind.
        BudgetExhaustedError: If the solver gave up; ``partial`` holds the trace.
    """
    s = method.settings
    phi_ref = reference.phi_ref if reference is not None else None
    d0 = float(np.linalg.norm(x0 - reference.x_ref)) if reference is not None else None

    if method.solver == "restart_acg":
        if problem.smooth_part is None:
            raise ValidationError("restart_acg needs a smooth problem")
        lam = resolve_lambda(problem, s, d0 or 0.0)
        config = RestartConfig(sigma=s.sigma, max_inner=s.max_inner, max_outer=s.max_outer)
        return solve(problem, x0, lam, s.eps_bar, config, phi_ref=phi_ref, d0_estimate=d0)

    if method.solver == "fista":
        config = BaselineConfig(
            max_iters=s.max_iters, target_gap=s.eps_bar, record_every=s.record_every
        )
        return fista_solve(problem, x0, config, phi_ref=phi_ref, d0_estimate=d0)

    if method.solver == "mpb":
        if problem.nonsmooth_part is None:
            raise ValidationError("mpb needs a nonsmooth problem")
        lam = resolve_lambda(problem, s, d0 or 0.0)
        config = BundleConfig(
            max_inner=s.max_inner,
            max_outer=s.max_outer,
            max_cuts=s.max_cuts,
            dual_tol=s.dual_tol,
            budget_constant=s.budget_constant,
        )
        return hpe_solve(
            problem,
            x0,
            lam,
            s.delta,
            s.eps_bar,
            config,
            phi_ref=phi_ref,
            d0_estimate=d0 if d0 else None,
        )

    if method.solver == "subgradient":
        config = BaselineConfig(max_iters=s.max_iters, record_every=s.record_every)
        return subgradient_solve(problem, x0, s.eps_bar, config, phi_ref=phi_ref)

    raise ValidationError(f"Unknown method: {method.solver}")


def format_trace_csv(run: RunTrace) -> str:
    """Render a trace with the fixed header ``k,inner_iters,oracle_calls,phi,bound,seconds``.

    phi and bound use 17 significant digits; a missing bound is an empty field.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in run.rows:
        writer.writerow(
            [
                row.k,
                row.inner_iters,
                row.oracle_calls,
                f"{row.phi:.17g}",
                "" if row.bound is None else f"{row.bound:.17g}",
                f"{row.seconds:.6f}",
            ]
        )
    return buffer.getvalue()


def write_trace_csv(run: RunTrace, path: Path) -> Path:
    """Write a trace CSV atomically.

    Args:
        run: Trace to write.
        path: Destination.

    Returns:
        The path written.
    """
    atomic_write_text(path, format_trace_csv(run))
    logger.debug(f"Wrote {len(run.rows)} rows to {path}")
    return path


def _gap_key(gap: float) -> str:
    return f"{gap:.0e}"


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value


def outcome_summary(outcome: MethodOutcome, phi_ref: float | None) -> dict[str, Any]:
    """Return the summary entry of one method cell (no timing fields)."""
    run = outcome.run
    entry: dict[str, Any] = {
        "label": outcome.spec.label,
        "solver": outcome.spec.solver,
        "status": run.status.value if run is not None else RunStatus.FAILED.value,
        "message": run.message if run is not None else "",
        "error": outcome.error,
        "csv": outcome.csv_path.name if outcome.csv_path is not None else None,
    }
    if run is None:
        return entry
    entry.update(
        {
            "config": {k: _json_value(v) for k, v in run.config.items()},
            "outer_iters": run.rows[-1].k if run.rows else 0,
            "total_inner_iters": run.total_inner_iters,
            "oracle_calls": run.total_oracle_calls,
            "phi_final": _json_value(float(run.phi_final)),
        }
    )
    if phi_ref is not None:
        entry["calls_to_gap"] = {
            _gap_key(gap): run.calls_to_reach(phi_ref, gap) for gap in SUMMARY_GAPS
        }
    return entry


def write_summary(summary: dict[str, Any], path: Path) -> Path:
    """Write the summary document atomically as indented JSON."""
    atomic_write_text(path, json.dumps(summary, indent=2, sort_keys=False) + "\n")
    logger.info(f"Wrote summary to {path}")
    return path


def reference_for(problem: CompositeProblem, tol: float) -> ReferenceSolution:
    """Return the cached reference, falling back to the best partial solve.

    Args:
        problem: Problem to solve.
        tol: Reference tolerance.

    Returns:
        ReferenceSolution.

    Raises:
        BudgetExhaustedError: If the solve produced nothing usable.
    """
    try:
        return get_cached_reference(problem, tol)
    except BudgetExhaustedError as e:
        if e.partial is None:
            raise
        logger.warning(
            f"reference for {problem.name} stopped at bound {e.partial.gap_bound:.3e} "
            f"> tol={tol:g}; using best point found"
        )
        return e.partial


def _run_cell(
    problem: CompositeProblem,
    x0: np.ndarray,
    method: MethodSpec,
    reference: ReferenceSolution,
    paths: Paths,
) -> MethodOutcome:
    logger.info(f"Running {method.label} ({method.solver})")
    outcome = MethodOutcome(spec=method, run=None)
    try:
        outcome.run = run_method(problem, x0, method, reference)
    except BudgetExhaustedError as e:
        outcome.run = e.partial if isinstance(e.partial, RunTrace) else None
        outcome.error = str(e)
        logger.error(f"{method.label} failed: {e}")
    except HpeBenchError as e:
        outcome.error = str(e)
        logger.error(f"{method.label} failed: {e}")
    if outcome.run is not None:
        outcome.csv_path = write_trace_csv(outcome.run, paths.trace_csv(method.label))
    return outcome


def run_experiment(*, spec: ExperimentSpec) -> dict[str, Any]:
    """Run every method cell of an experiment on one problem.

    Builds the problem once, solves it to the reference tolerance, runs the
    cells (concurrently up to ``spec.max_workers``) and writes one trace CSV per
    cell plus ``summary.json``. A failing cell is recorded in the summary and
    the remaining cells still run.

    Args:
        spec: Experiment description.

    Returns:
        The summary document that was written.
    """
    paths = spec.paths
    paths.out_dir.mkdir(parents=True, exist_ok=True)
    problem = spec.problem.build()
    x0 = starting_point(problem)
    logger.info(
        f"Experiment on {problem.name} (n={problem.dimension}) "
        f"with {len(spec.methods)} method(s)"
    )

    reference = reference_for(problem, spec.reference_tol)
    d0 = float(np.linalg.norm(x0 - reference.x_ref))

    with ThreadPoolExecutor(max_workers=spec.max_workers) as pool:
        futures = [
            pool.submit(_run_cell, problem, x0, method, reference, paths)
            for method in spec.methods
        ]
        outcomes = [f.result() for f in futures]

    summary = {
        "problem": {
            **spec.problem.to_dict(),
            "name": problem.name,
            "dimension": problem.dimension,
            "smooth": problem.is_smooth,
        },
        "reference": {
            "phi_ref": reference.phi_ref,
            "tol": reference.tol,
            "gap_bound": reference.gap_bound,
            "certified": reference.certified,
            "method": reference.method,
            "iterations": reference.iterations,
            "d0": d0,
        },
        "methods": [outcome_summary(o, reference.phi_ref) for o in outcomes],
    }
    write_summary(summary, paths.summary_json)
    failed = [o.spec.label for o in outcomes if o.error is not None]
    if failed:
        logger.warning(f"Failed cells: {', '.join(failed)}")
    return summary
