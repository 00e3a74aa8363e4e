"""Restart ACG: the accelerated HPE outer loop driven by ACG inner solves.

Each outer step extrapolates a prox center from the best iterate w and the dual
iterate z, runs ACG on ``phi + ||. - z_tilde||^2 / (2 lam)`` until the relative
error criterion holds, then takes the dual step ``z -= b * u``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from hpe_bench.core.acg import (
    AcgTrace,
    acg_solve_subproblem,
    subproblem_params,
)
from hpe_bench.core.exceptions import BudgetExhaustedError, ValidationError
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import CompositeProblem, ShiftedSmooth, eval_phi
from hpe_bench.core.types import HpeTriple, RunStatus, RunTrace, TraceRow
from hpe_bench.core.validation import (
    validate_count,
    validate_dimension,
    validate_nonnegative,
    validate_open_unit,
    validate_positive,
)

logger = get_logger("restart_acg")

WARMUP_STEPS = 20


@dataclass(frozen=True)
class RestartConfig:
    """Knobs of a restart ACG run.

    Attributes:
        sigma: Relative criterion constant in (0, 1).
        max_inner: ACG step cap per outer iteration.
        max_outer: Outer iteration cap.
        abs_residual_tol: Absolute guard override for the inner criterion.
    """

    sigma: float = 0.9
    max_inner: int = 10_000
    max_outer: int = 100_000
    abs_residual_tol: float | None = None

    def __post_init__(self) -> None:
        """Validate the knobs."""
        validate_open_unit(self.sigma, "sigma")
        validate_count(self.max_inner, "max_inner")
        validate_count(self.max_outer, "max_outer")


@dataclass(frozen=True, eq=False)
class RestartState:
    """Outer-loop quantities of restart ACG.

    Attributes:
        k: Outer counter.
        B: B_k.
        z: Dual iterate z_k.
        w: Best iterate w_k.
        phi_at_w: Cached phi(w_k).
        d0_estimate: Distance-to-optimum estimate used for bounds.
        total_inner_iters: ACG steps so far.
        total_oracle_calls: f evaluations so far.
    """

    k: int
    B: float
    z: np.ndarray
    w: np.ndarray
    phi_at_w: float
    d0_estimate: float
    total_inner_iters: int
    total_oracle_calls: int


@dataclass(frozen=True, eq=False)
class OuterRecord:
    """What one outer step did, for the invariant suites."""

    k: int
    lam: float
    sigma: float
    b: float
    B_prev: float
    B: float
    z_prev: np.ndarray
    w_prev: np.ndarray
    z_tilde: np.ndarray
    triple: HpeTriple
    z: np.ndarray
    w: np.ndarray
    phi_at_w: float
    inner_iters: int
    acg: AcgTrace | None


@dataclass
class RestartTrace:
    """Instrumentation recorder for a restart ACG run.

    Attributes:
        outer: One record per outer step.
        keep_inner: Also record every ACG step of every subproblem.
    """

    outer: list[OuterRecord] = field(default_factory=list)
    keep_inner: bool = True


def restart_init(
    problem: CompositeProblem, w0: np.ndarray, d0_estimate: float = 0.0
) -> RestartState:
    """Return the state at k = 0: B_0 = 0 and z_0 = w_0.

    Args:
        problem: Smooth composite problem.
        w0: Starting point in dom h.
        d0_estimate: Distance estimate carried for bounds.

    Returns:
        Initial state (one oracle call spent on phi(w_0)).

    Raises:
        ValidationError: If w0 has the wrong size or lies outside dom h.
    """
    validate_dimension(w0, problem.dimension, "w0")
    w0 = np.array(w0, dtype=float)
    phi0 = eval_phi(problem, w0)
    if not math.isfinite(phi0):
        raise ValidationError("w0 must lie in dom h")
    return RestartState(
        k=0,
        B=0.0,
        z=w0.copy(),
        w=w0.copy(),
        phi_at_w=phi0,
        d0_estimate=d0_estimate,
        total_inner_iters=0,
        total_oracle_calls=1,
    )


def outer_coefficients(B: float, lam: float) -> tuple[float, float]:
    """Return b_k and B_k from B_{k-1}.

    Args:
        B: B_{k-1}.
        lam: Outer stepsize.

    Returns:
        Tuple (b_k, B_k) with b_k the positive root of b^2 - lam b - lam B = 0.
    """
    b = (lam + math.sqrt(lam * lam + 4.0 * lam * B)) / 2.0
    return b, B + b


def outer_step(
    state: RestartState,
    problem: CompositeProblem,
    lam: float,
    sigma: float = 0.9,
    max_inner: int = 10_000,
    abs_residual_tol: float | None = None,
    trace: RestartTrace | None = None,
) -> tuple[RestartState, HpeTriple, int]:
    """Run one outer iteration of restart ACG.

    Args:
        state: Current outer state.
        problem: Smooth composite problem.
        lam: Outer stepsize.
        sigma: Relative criterion constant.
        max_inner: ACG step cap.
        abs_residual_tol: Absolute guard override.
        trace: Optional recorder receiving an OuterRecord.

    Returns:
        Tuple (next state, accepted triple, inner iterations).

    Raises:
        ValidationError: If the problem is not smooth.
        BudgetExhaustedError: If ACG does not meet the criterion within max_inner.
    """
    if problem.smooth_part is None:
        raise ValidationError("restart ACG needs a smooth problem")
    validate_positive(lam, "lam")

    b, B_next = outer_coefficients(state.B, lam)
    z_tilde = (state.B * state.w + b * state.z) / B_next

    params = subproblem_params(
        problem.smooth_part.lipschitz_L,
        lam,
        z_tilde,
        sigma=sigma,
        max_inner=max_inner,
        abs_residual_tol=abs_residual_tol,
    )
    acg_trace = None
    if trace is not None and trace.keep_inner:
        acg_trace = AcgTrace(
            ShiftedSmooth(problem.smooth_part, z_tilde, lam), problem.h, params
        )
    result = acg_solve_subproblem(problem, z_tilde, params, acg_trace)
    triple = result.triple

    z_next = state.z - b * triple.u
    if result.phi_at_w_tilde <= state.phi_at_w:
        w_next, phi_next = triple.w_tilde, result.phi_at_w_tilde
    else:
        w_next, phi_next = state.w, state.phi_at_w

    new_state = RestartState(
        k=state.k + 1,
        B=B_next,
        z=z_next,
        w=w_next,
        phi_at_w=phi_next,
        d0_estimate=state.d0_estimate,
        total_inner_iters=state.total_inner_iters + result.inner_iters,
        total_oracle_calls=state.total_oracle_calls + result.oracle_calls,
    )
    logger.debug(
        f"outer k={new_state.k} b={b:.4g} inner={result.inner_iters} "
        f"phi(w)={phi_next:.12g} eta={triple.eta:.3e}"
    )

    if trace is not None:
        trace.outer.append(
            OuterRecord(
                k=new_state.k,
                lam=lam,
                sigma=sigma,
                b=b,
                B_prev=state.B,
                B=B_next,
                z_prev=state.z,
                w_prev=state.w,
                z_tilde=z_tilde,
                triple=triple,
                z=z_next,
                w=w_next,
                phi_at_w=phi_next,
                inner_iters=result.inner_iters,
                acg=acg_trace,
            )
        )
    return new_state, triple, result.inner_iters


def default_lambda(L: float, d0_estimate: float, eps_bar: float) -> float:
    """Return ``max(1/L, min(d0^2/eps_bar, d0/sqrt(L eps_bar)))``.

    Args:
        L: Smoothness constant of f.
        d0_estimate: Distance-to-optimum estimate.
        eps_bar: Target accuracy.

    Returns:
        A stepsize inside [1/L, max(1/L, d0^2/eps_bar)].
    """
    validate_positive(L, "L")
    validate_positive(d0_estimate, "d0_estimate")
    validate_positive(eps_bar, "eps_bar")
    upper = d0_estimate * d0_estimate / eps_bar
    middle = d0_estimate / (math.sqrt(L) * math.sqrt(eps_bar))
    return max(1.0 / L, min(upper, middle))


def inner_iteration_bound(lam: float, L: float) -> int:
    """Return the worst-case ACG step count per outer iteration.

    Args:
        lam: Outer stepsize.
        L: Smoothness constant of f.

    Returns:
        ``ceil(min(2 sqrt(6 lam L), (1/2 + sqrt(lam L)) ln(6 lam L)))``.

    Raises:
        ValidationError: If lam * L < 1, where the bound does not apply.
    """
    validate_positive(lam, "lam")
    validate_positive(L, "L")
    x = lam * L
    if x < 1.0:
        raise ValidationError(f"the inner bound needs lam * L >= 1, got {x}")
    return math.ceil(min(2.0 * math.sqrt(6.0 * x), (0.5 + math.sqrt(x)) * math.log(6.0 * x)))


def outer_iteration_bound(d0: float, lam: float, eps_bar: float) -> int:
    """Return the a-priori outer count ``ceil(sqrt(2) d0 / sqrt(lam eps_bar))``."""
    return math.ceil(math.sqrt(2.0) * d0 / math.sqrt(lam * eps_bar))


def warmup_state(
    problem: CompositeProblem,
    w0: np.ndarray,
    lam: float,
    steps: int = WARMUP_STEPS,
    config: RestartConfig | None = None,
) -> RestartState:
    """Run K warm-up outer steps from ``w0`` and return the final state.

    The state carries the oracle calls and inner iterations the warm-up spent.
    """
    config = config or RestartConfig()
    state = restart_init(problem, w0)
    for _ in range(steps):
        state, _, _ = outer_step(
            state,
            problem,
            lam,
            sigma=config.sigma,
            max_inner=config.max_inner,
            abs_residual_tol=config.abs_residual_tol,
        )
    return state


def warmup_d0(
    problem: CompositeProblem,
    w0: np.ndarray,
    lam: float,
    steps: int = WARMUP_STEPS,
    config: RestartConfig | None = None,
) -> float:
    """Estimate d0 as ``||w_0 - w_K||`` after K warm-up outer steps.

    The value is a heuristic, not a certified distance to the solution set.

    Args:
        problem: Smooth composite problem.
        w0: Starting point.
        lam: Outer stepsize for the warm-up.
        steps: Number of warm-up steps K.
        config: Inner-solver knobs.

    Returns:
        The heuristic distance.
    """
    return _warmup_distance(warmup_state(problem, w0, lam, steps, config), w0, steps)


def _warmup_distance(state: RestartState, w0: np.ndarray, steps: int) -> float:
    d0 = float(np.linalg.norm(state.w - np.asarray(w0, dtype=float)))
    logger.warning(f"d0={d0:.6g} is a heuristic warm-up estimate ({steps} steps)")
    return d0


def _check_lambda_range(lam: float, L: float, d0: float | None, eps_bar: float) -> None:
    if lam < 1.0 / L:
        logger.warning(f"lam={lam:.4g} is below 1/L={1.0 / L:.4g}")
    if d0 is not None and d0 > 0 and lam > d0 * d0 / eps_bar:
        logger.warning(f"lam={lam:.4g} is above d0^2/eps_bar={d0 * d0 / eps_bar:.4g}")


def solve(
    problem: CompositeProblem,
    w0: np.ndarray,
    lam: float,
    eps_bar: float,
    config: RestartConfig | None = None,
    phi_ref: float | None = None,
    d0_estimate: float | None = None,
    trace: RestartTrace | None = None,
) -> RunTrace:
    """Run restart ACG until the target accuracy is reached.

    With ``phi_ref`` the run stops once ``phi(w_k) - phi_ref <= eps_bar``;
    without it the run stops at ``k = ceil(sqrt(2) d0 / sqrt(lam eps_bar))``.

    Args:
        problem: Smooth composite problem.
        w0: Starting point in dom h.
        lam: Outer stepsize.
        eps_bar: Target accuracy.
        config: Run knobs.
        phi_ref: Reference optimal value, if known.
        d0_estimate: Distance estimate; a warm-up estimate is used when missing
            and no reference is given.
        trace: Optional recorder.

    Returns:
        RunTrace with one row per outer iteration. Warm-up work is counted in
        every row's oracle calls and in the first row's inner iterations.

    Raises:
        ValidationError: On bad arguments.
        BudgetExhaustedError: If max_outer is reached or an inner solve fails;
            ``partial`` holds the RunTrace so far.
    """
    config = config or RestartConfig()
    if problem.smooth_part is None:
        raise ValidationError("restart ACG needs a smooth problem")
    validate_positive(lam, "lam")
    validate_positive(eps_bar, "eps_bar")
    L = problem.smooth_part.lipschitz_L

    d0_source = "given"
    warmup_calls = warmup_inner = 0
    if d0_estimate is None and phi_ref is None:
        warm = warmup_state(problem, w0, lam, config=config)
        d0_estimate = _warmup_distance(warm, w0, WARMUP_STEPS)
        warmup_calls, warmup_inner = warm.total_oracle_calls, warm.total_inner_iters
        d0_source = "heuristic"
    elif d0_estimate is None:
        d0_source = "none"
    else:
        validate_nonnegative(d0_estimate, "d0_estimate")
    _check_lambda_range(lam, L, d0_estimate, eps_bar)

    run = RunTrace(
        method="restart_acg",
        config={
            "lambda": lam,
            "eps_bar": eps_bar,
            "sigma": config.sigma,
            "max_inner": config.max_inner,
            "max_outer": config.max_outer,
            "d0": d0_estimate,
            "d0_source": d0_source,
            "warmup_oracle_calls": warmup_calls,
            "warmup_inner_iters": warmup_inner,
        },
    )
    k_target = None
    if phi_ref is None:
        k_target = max(1, outer_iteration_bound(d0_estimate, lam, eps_bar))
        run.config["k_target"] = k_target

    logger.info(
        f"restart ACG on {problem.name}: lam={lam:.4g} L={L:.4g} eps_bar={eps_bar:.3g}"
    )
    start = time.perf_counter()
    state = restart_init(problem, w0, d0_estimate or 0.0)
    while True:
        if state.k >= config.max_outer:
            run.status = RunStatus.BUDGET
            run.message = f"max_outer={config.max_outer} reached"
            logger.error(f"restart ACG: {run.message}")
            raise BudgetExhaustedError(run.message, partial=run)
        try:
            state, _, inner = outer_step(
                state,
                problem,
                lam,
                sigma=config.sigma,
                max_inner=config.max_inner,
                abs_residual_tol=config.abs_residual_tol,
                trace=trace,
            )
        except BudgetExhaustedError as e:
            run.status = RunStatus.FAILED
            run.message = f"inner solve failed at k={state.k + 1}: {e}"
            raise BudgetExhaustedError(run.message, partial=run) from e

        bound = None
        if d0_estimate is not None:
            bound = 2.0 * d0_estimate**2 / (lam * state.k**2)
        run.append(
            TraceRow(
                k=state.k,
                inner_iters=inner + (warmup_inner if state.k == 1 else 0),
                oracle_calls=warmup_calls + state.total_oracle_calls,
                phi=state.phi_at_w,
                bound=bound,
                seconds=time.perf_counter() - start,
            )
        )
        run.x_final, run.phi_final = state.w, state.phi_at_w

        if phi_ref is not None and state.phi_at_w - phi_ref <= eps_bar:
            run.message = f"gap <= {eps_bar:g} at k={state.k}"
            break
        if k_target is not None and state.k >= k_target:
            run.message = f"a-priori count k={k_target} reached"
            break

    run.status = RunStatus.CONVERGED
    logger.info(
        f"restart ACG done: k={state.k} inner={run.total_inner_iters} "
        f"calls={run.total_oracle_calls} phi={state.phi_at_w:.12g}"
    )
    return run
