"""Complexity-scaling sweep over the target accuracy."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from hpe_bench.config import MethodSpec, Paths, ProblemDescriptor, SolverSettings
from hpe_bench.core.bundle import oracle_budget
from hpe_bench.core.exceptions import ValidationError
from hpe_bench.core.file_io import atomic_write_text
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import CompositeProblem
from hpe_bench.core.restart_acg import inner_iteration_bound, outer_iteration_bound
from hpe_bench.core.validation import validate_positive
from hpe_bench.pipelines.experiment import reference_for, run_method, starting_point

logger = get_logger("bench")

BENCH_COLUMNS = ("eps_bar", "lambda", "outer", "total_inner", "oracle_calls", "predicted")
DEFAULT_EPS_BARS = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class BenchRow:
    """One sweep point.

    Attributes:
        eps_bar: Target accuracy.
        lam: Stepsize used.
        outer: Outer iterations.
        total_inner: Inner iterations summed over the run.
        oracle_calls: f-oracle calls.
        predicted: Worst-case total predicted by the complexity bound.
    """

    eps_bar: float
    lam: float
    outer: int
    total_inner: int
    oracle_calls: int
    predicted: int | None


def predicted_total(
    problem: CompositeProblem, lam: float, d0: float, eps_bar: float, settings: SolverSettings
) -> int | None:
    """Return the a-priori total work for one sweep point.

    Smooth problems use outer count times the inner bound (needs lam * L >= 1);
    nonsmooth problems use the MPB oracle budget.
    """
    if d0 <= 0:
        return None
    if problem.is_smooth:
        L = problem.smooth_part.lipschitz_L
        if lam * L < 1.0:
            return None
        return max(1, outer_iteration_bound(d0, lam, eps_bar)) * inner_iteration_bound(lam, L)
    M = problem.nonsmooth_part.lipschitz_M
    return oracle_budget(M, d0, eps_bar, settings.budget_constant)


def fit_slope(eps_bars: Sequence[float], totals: Sequence[int]) -> float:
    """Return the least-squares slope of log(total) against log(eps_bar)."""
    slope, _ = np.polyfit(np.log(eps_bars), np.log(np.maximum(totals, 1)), 1)
    return float(slope)


def format_bench_csv(rows: Sequence[BenchRow]) -> str:
    """Render sweep rows under ``BENCH_COLUMNS``."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                f"{r.eps_bar:.17g}",
                f"{r.lam:.17g}",
                r.outer,
                r.total_inner,
                r.oracle_calls,
                "" if r.predicted is None else r.predicted,
            ]
        )
    return buffer.getvalue()


def run_bench(
    *,
    problem: ProblemDescriptor,
    out_dir: Path,
    eps_bars: Sequence[float] = DEFAULT_EPS_BARS,
    settings: SolverSettings | None = None,
    reference_tol: float = 1e-10,
) -> list[BenchRow]:
    """Sweep eps_bar and record the work restart ACG (smooth) or MPB spends.

    Each point stops on the reference gap and uses the default stepsize for its
    eps_bar unless ``settings`` fixes one. Writes ``bench.csv`` and logs the
    fitted log-log slope of total inner iterations against eps_bar.

    Args:
        problem: Problem descriptor.
        out_dir: Output directory.
        eps_bars: Target accuracies.
        settings: Base solver settings; eps_bar is overridden per point.
        reference_tol: Tolerance of the reference solve.

    Returns:
        One BenchRow per eps_bar.

    Raises:
        ValidationError: If eps_bars is empty or holds a nonpositive entry.
        BudgetExhaustedError: If a sweep point fails.
    """
    if not eps_bars:
        raise ValidationError("eps_bars must not be empty")
    for eps in eps_bars:
        validate_positive(eps, "eps_bar")
    settings = settings or SolverSettings()
    instance = problem.build()
    x0 = starting_point(instance)
    reference = reference_for(instance, reference_tol)
    d0 = float(np.linalg.norm(x0 - reference.x_ref))
    solver = "restart_acg" if instance.is_smooth else "mpb"

    rows = []
    for eps in eps_bars:
        method = MethodSpec(label=solver, solver=solver, settings=settings.merged(eps_bar=eps))
        run = run_method(instance, x0, method, reference)
        lam = float(run.config["lambda"])
        row = BenchRow(
            eps_bar=eps,
            lam=lam,
            outer=run.rows[-1].k if run.rows else 0,
            total_inner=run.total_inner_iters,
            oracle_calls=run.total_oracle_calls,
            predicted=predicted_total(instance, lam, d0, eps, settings),
        )
        logger.info(
            f"bench eps_bar={eps:g}: lam={lam:.4g} outer={row.outer} "
            f"inner={row.total_inner} calls={row.oracle_calls}"
        )
        rows.append(row)

    atomic_write_text(Paths(out_dir=Path(out_dir)).bench_csv, format_bench_csv(rows))
    if len(rows) >= 2:
        slope = fit_slope([r.eps_bar for r in rows], [r.total_inner for r in rows])
        logger.info(f"{solver}: log-log slope of total inner vs eps_bar = {slope:.3f}")
    return rows
