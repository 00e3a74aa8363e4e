"""Single-step baselines: FISTA and the fixed-step proximal subgradient method."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from hpe_bench.core.exceptions import ValidationError
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import CompositeProblem, eval_phi
from hpe_bench.core.types import RunStatus, RunTrace, TraceRow
from hpe_bench.core.validation import (
    validate_count,
    validate_dimension,
    validate_positive,
)

logger = get_logger("baselines")


@dataclass(frozen=True)
class BaselineConfig:
    """Knobs shared by the baselines.

    Attributes:
        max_iters: Iteration cap.
        target_gap: Stop once ``phi - phi_ref`` falls to this (needs phi_ref).
        record_every: Emit a trace row every this many iterations.
    """

    max_iters: int = 10_000
    target_gap: float | None = None
    record_every: int = 1

    def __post_init__(self) -> None:
        """Validate the knobs."""
        validate_count(self.max_iters, "max_iters")
        validate_count(self.record_every, "record_every")
        if self.target_gap is not None:
            validate_positive(self.target_gap, "target_gap")


def fista_momentum(t: float) -> float:
    """Return ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""
    return (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0


def _finish(run: RunTrace, reached: bool, phi_ref: float | None, iters: int) -> RunTrace:
    if phi_ref is not None and run.config.get("target_gap") is not None and not reached:
        run.status = RunStatus.BUDGET
        run.message = f"target gap not reached in {iters} iterations"
        logger.error(f"{run.method}: {run.message} (best phi={run.phi_final:.12g})")
    else:
        run.status = RunStatus.CONVERGED
        run.message = f"stopped after {iters} iterations"
    return run


def fista_solve(
    problem: CompositeProblem,
    x0: np.ndarray,
    config: BaselineConfig | None = None,
    phi_ref: float | None = None,
    d0_estimate: float | None = None,
) -> RunTrace:
    """Run FISTA with stepsize 1/L.

    Each iteration evaluates the gradient at the extrapolated point and phi at
    the new primal point, two f-oracle calls in total. Rows report phi(x_k).

    Args:
        problem: Smooth composite problem.
        x0: Starting point.
        config: Knobs.
        phi_ref: Reference optimal value, enables the target-gap test.
        d0_estimate: Distance estimate for the bound ``2 L d0^2 / (k+1)^2``.

    Returns:
        RunTrace; status BUDGET if a target gap was set and not reached.
    """
    if problem.smooth_part is None:
        raise ValidationError("FISTA needs a smooth problem")
    config = config or BaselineConfig()
    validate_dimension(x0, problem.dimension, "x0")
    f = problem.smooth_part
    L = f.lipschitz_L
    step = 1.0 / L

    run = RunTrace(
        method="fista",
        config={
            "stepsize": step,
            "max_iters": config.max_iters,
            "target_gap": config.target_gap,
        },
    )
    start = time.perf_counter()
    x = np.array(x0, dtype=float)
    y = x.copy()
    t = 1.0
    calls = 0
    reached = False
    since_row = 0
    k = 0
    for k in range(1, config.max_iters + 1):
        x_prev = x
        x = problem.h.prox_at(y - step * f.gradient_at(y), step)
        phi = eval_phi(problem, x)
        calls += 2
        t_next = fista_momentum(t)
        y = x + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        since_row += 1

        if phi <= run.phi_final:
            run.x_final, run.phi_final = x, phi
        reached = (
            phi_ref is not None
            and config.target_gap is not None
            and phi - phi_ref <= config.target_gap
        )
        if reached or k % config.record_every == 0 or k == config.max_iters:
            bound = None
            if d0_estimate is not None:
                bound = 2.0 * L * d0_estimate**2 / (k + 1) ** 2
            run.append(
                TraceRow(k, since_row, calls, phi, bound, time.perf_counter() - start)
            )
            since_row = 0
        if reached:
            break

    logger.info(f"FISTA done: k={k} calls={calls} phi={run.phi_final:.12g}")
    return _finish(run, reached, phi_ref, k)


def subgradient_solve(
    problem: CompositeProblem,
    x0: np.ndarray,
    eps_bar: float,
    config: BaselineConfig | None = None,
    phi_ref: float | None = None,
) -> RunTrace:
    """Run ``x_{k+1} = prox_h(x_k - lam f'(x_k), lam)`` with ``lam = eps_bar / M^2``.

    One f-oracle call per iteration; rows report the running best phi. The
    target gap defaults to eps_bar when phi_ref is given.

    Args:
        problem: Nonsmooth composite problem.
        x0: Starting point in dom h.
        eps_bar: Target accuracy.
        config: Knobs.
        phi_ref: Reference optimal value.

    Returns:
        RunTrace; status BUDGET if the target gap was not reached.
    """
    if problem.nonsmooth_part is None:
        raise ValidationError("the subgradient method needs a nonsmooth problem")
    validate_positive(eps_bar, "eps_bar")
    config = config or BaselineConfig()
    validate_dimension(x0, problem.dimension, "x0")
    M = problem.nonsmooth_part.lipschitz_M
    lam = eps_bar / (M * M)
    target = config.target_gap if config.target_gap is not None else eps_bar

    run = RunTrace(
        method="subgradient",
        config={"stepsize": lam, "max_iters": config.max_iters, "target_gap": target},
    )
    start = time.perf_counter()
    x = np.array(x0, dtype=float)
    calls = 0
    reached = False
    since_row = 0
    k = 0
    for k in range(1, config.max_iters + 1):
        value, slope = problem.f_value_and_slope(x)
        calls += 1
        phi = value + problem.h.value_at(x)
        if phi <= run.phi_final:
            run.x_final, run.phi_final = x, phi
        since_row += 1
        reached = phi_ref is not None and run.phi_final - phi_ref <= target
        if reached or k % config.record_every == 0 or k == config.max_iters:
            run.append(
                TraceRow(k, since_row, calls, run.phi_final, None, time.perf_counter() - start)
            )
            since_row = 0
        if reached:
            break
        x = problem.h.prox_at(x - lam * slope, lam)

    logger.info(
        f"subgradient done: k={k} calls={calls} lam={lam:.4g} best={run.phi_final:.12g}"
    )
    return _finish(run, reached, phi_ref, k)
