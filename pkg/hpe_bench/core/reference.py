"""High-accuracy reference solves with a gap certificate, cached per problem."""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog

from hpe_bench.core.bundle import BundleConfig, mpb_outer_step
from hpe_bench.core.exceptions import BudgetExhaustedError, ValidationError
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import (
    BoxIndicator,
    CompositeProblem,
    L1Norm,
    MaxAffine,
    ZeroTerm,
    eval_phi,
    fingerprint,
)
from hpe_bench.core.validation import validate_count, validate_positive

logger = get_logger("reference")

_reference_cache: dict[tuple[str, float], "ReferenceSolution"] = {}
_reference_lock = threading.Lock()

# Gradient-mapping certificates are checked every few iterations.
_CHECK_EVERY = 5
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    """Result of a reference solve.

    Attributes:
        x_ref: Best point found.
        phi_ref: phi(x_ref).
        tol: Requested tolerance.
        gap_bound: Upper bound on ``phi_ref - phi_*`` at exit.
        certified: True when gap_bound is a proven bound (strong convexity or
            an LP dual value); False when it relies on an estimated radius.
        radius: Radius estimate used by the bound, if any.
        method: "accelerated-gradient", "epigraph-lp" or "mpb".
        iterations: Gradient steps, simplex iterations or MPB outer steps used.
    """

    x_ref: np.ndarray
    phi_ref: float
    tol: float
    gap_bound: float
    certified: bool
    radius: float | None
    method: str
    iterations: int


def _radius_estimate(x: np.ndarray, x0: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(x - x0)))


def _smooth_reference(
    problem: CompositeProblem, tol: float, x0: np.ndarray, max_iters: int
) -> ReferenceSolution:
    f = problem.smooth_part
    L, mu = f.lipschitz_L, f.strong_convexity_mu_f
    step = 1.0 / L
    # Constant momentum when mu > 0, FISTA momentum otherwise.
    fixed_beta = None
    if mu > 0:
        q = math.sqrt(mu / L)
        fixed_beta = (1.0 - q) / (1.0 + q)

    x = x0.copy()
    y = x0.copy()
    t = 1.0
    best = None
    for k in range(1, max_iters + 1):
        grad_y = f.gradient_at(y)
        x_prev = x
        x = problem.h.prox_at(y - step * grad_y, step)

        if k % _CHECK_EVERY == 0 or k == max_iters:
            # s lies in the subdifferential of phi at x.
            s = L * (y - x) + f.gradient_at(x) - grad_y
            s_norm = float(np.linalg.norm(s))
            phi = eval_phi(problem, x)
            if mu > 0:
                bound, radius = s_norm * s_norm / (2.0 * mu), None
            else:
                radius = _radius_estimate(x, x0)
                bound = s_norm * radius
            if best is None or bound < best.gap_bound:
                best = ReferenceSolution(
                    x_ref=x,
                    phi_ref=phi,
                    tol=tol,
                    gap_bound=bound,
                    certified=mu > 0,
                    radius=radius,
                    method="accelerated-gradient",
                    iterations=k,
                )
            if bound <= tol:
                return best

        if fixed_beta is not None:
            y = x + fixed_beta * (x - x_prev)
        else:
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = x + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next

    raise BudgetExhaustedError(
        f"reference solve did not certify tol={tol:g} in {max_iters} iterations",
        partial=best,
    )


@dataclass(frozen=True, eq=False)
class EpigraphBound:
    """Solution of the epigraph LP of a max-affine problem.

    Attributes:
        x: Primal minimizer from the LP.
        lower: LP dual objective, a lower bound on phi_*.
        iterations: Simplex iterations.
    """

    x: np.ndarray
    lower: float
    iterations: int


def _finite_bounds(values: np.ndarray) -> list[float | None]:
    return [float(v) if math.isfinite(v) else None for v in values]


def epigraph_lower_bound(problem: CompositeProblem) -> EpigraphBound | None:
    """Solve ``min t + h(x)`` s.t. ``G x + c <= t`` as a linear program.

    Supports h in {zero, l1 norm, box}; the l1 term splits x into positive and
    negative parts. The dual objective is rebuilt from the HiGHS marginals.

    Args:
        problem: Nonsmooth composite problem.

    Returns:
        EpigraphBound, or None when f is not max-affine, h is not
        LP-representable or the LP did not finish.
    """
    f = problem.nonsmooth_part
    h = problem.h
    if not isinstance(f, MaxAffine) or not isinstance(h, (ZeroTerm, L1Norm, BoxIndicator)):
        return None
    n = problem.dimension
    m = f.G.shape[0]
    epigraph = -np.ones((m, 1))
    if isinstance(h, L1Norm):
        cost = np.concatenate([np.full(2 * n, h.weight), [1.0]])
        A_ub = np.hstack([f.G, -f.G, epigraph])
        lower = np.concatenate([np.zeros(2 * n), [-np.inf]])
        upper = np.full(2 * n + 1, np.inf)
    else:
        cost = np.zeros(n + 1)
        cost[-1] = 1.0
        A_ub = np.hstack([f.G, epigraph])
        if isinstance(h, BoxIndicator):
            lower = np.append(np.broadcast_to(np.asarray(h.lower, dtype=float), (n,)), -np.inf)
            upper = np.append(np.broadcast_to(np.asarray(h.upper, dtype=float), (n,)), np.inf)
        else:
            lower = np.full(n + 1, -np.inf)
            upper = np.full(n + 1, np.inf)

    res = linprog(
        cost,
        A_ub=A_ub,
        b_ub=-f.c,
        bounds=list(zip(_finite_bounds(lower), _finite_bounds(upper))),
        method="highs-ds",
        options=_LP_OPTIONS,
    )
    if res.status != 0:
        logger.warning(f"epigraph LP for {problem.name} stopped with status {res.status}: {res.message}")
        return None

    dual = float(-f.c @ res.ineqlin.marginals)
    finite_lo, finite_up = np.isfinite(lower), np.isfinite(upper)
    dual += float(lower[finite_lo] @ res.lower.marginals[finite_lo])
    dual += float(upper[finite_up] @ res.upper.marginals[finite_up])

    z = np.asarray(res.x, dtype=float)
    x = z[:n] - z[n : 2 * n] if isinstance(h, L1Norm) else z[:n]
    if isinstance(h, BoxIndicator):
        x = h.prox_at(x, 1.0)
    return EpigraphBound(x=x, lower=dual, iterations=int(res.nit))


def _lp_reference(problem: CompositeProblem, tol: float, bound: EpigraphBound) -> ReferenceSolution:
    phi = eval_phi(problem, bound.x)
    solution = ReferenceSolution(
        x_ref=bound.x,
        phi_ref=phi,
        tol=tol,
        gap_bound=max(phi - bound.lower, 0.0),
        certified=True,
        radius=None,
        method="epigraph-lp",
        iterations=bound.iterations,
    )
    if solution.gap_bound > tol:
        raise BudgetExhaustedError(
            f"epigraph LP gap {solution.gap_bound:.3e} is above tol={tol:g}", partial=solution
        )
    return solution


def _nonsmooth_reference(
    problem: CompositeProblem, tol: float, x0: np.ndarray, max_iters: int
) -> ReferenceSolution:
    bound = epigraph_lower_bound(problem)
    if bound is not None:
        return _lp_reference(problem, tol, bound)

    M = problem.nonsmooth_part.lipschitz_M
    lam = 10.0 * max(1.0, float(np.linalg.norm(x0))) / M
    delta = tol / 10.0
    config = BundleConfig(dual_tol=delta / 10.0, dual_max_iter=10_000)

    w = x0.copy()
    best_x, best_phi = w, eval_phi(problem, w)
    best = None
    first_cut = None
    for k in range(1, max_iters + 1):
        inner, triple = mpb_outer_step(problem, w, lam, delta, k, config, first_cut)
        for x, phi in ((inner.x_tilde, inner.phi_at_x_tilde), (inner.x_j, inner.phi_at_x_j)):
            if phi < best_phi:
                best_x, best_phi = x, phi
        # eta + ||u|| R bounds the gap only when R covers the distance to a minimizer.
        radius = _radius_estimate(triple.w_tilde, x0)
        bound_k = triple.eta + float(np.linalg.norm(triple.u)) * radius
        if best is None or bound_k < best.gap_bound:
            best = ReferenceSolution(
                x_ref=best_x,
                phi_ref=best_phi,
                tol=tol,
                gap_bound=bound_k,
                certified=False,
                radius=radius,
                method="mpb",
                iterations=k,
            )
        if bound_k <= tol:
            return replace(best, x_ref=best_x, phi_ref=best_phi, gap_bound=bound_k, iterations=k)
        w = inner.x_j
        first_cut = inner.last_cut

    raise BudgetExhaustedError(
        f"reference solve did not certify tol={tol:g} in {max_iters} outer steps",
        partial=best,
    )


def reference_solve(
    problem: CompositeProblem,
    tol: float,
    x0: np.ndarray | None = None,
    max_iters: int = 1_000_000,
) -> ReferenceSolution:
    """Solve a problem to a certified gap ``phi_ref - phi_* <= tol``.

    Smooth problems run an accelerated proximal gradient loop and certify
    through the gradient mapping: ``||s||^2 / (2 mu_f)`` when mu_f > 0, else
    ``||s|| * R`` with an estimated radius R. Max-affine problems whose h is
    zero, an l1 norm or a box solve the epigraph LP and certify against its
    dual value. Other nonsmooth problems run MPB and report the uncertified
    bound ``eta + ||u|| * R``.

    Args:
        problem: Composite problem.
        tol: Target gap.
        x0: Starting point (zeros by default).
        max_iters: Iteration cap.

    Returns:
        ReferenceSolution.

    Raises:
        ValidationError: If tol is not positive.
        BudgetExhaustedError: If the cap is hit; ``partial`` holds the best
            ReferenceSolution.
    """
    validate_positive(tol, "tol")
    validate_count(max_iters, "max_iters")
    x0 = np.zeros(problem.dimension) if x0 is None else np.array(x0, dtype=float)
    if not math.isfinite(problem.h.value_at(x0)):
        x0 = problem.h.prox_at(x0, 1.0)
        if not math.isfinite(problem.h.value_at(x0)):
            raise ValidationError("could not find a starting point in dom h")

    if problem.is_smooth:
        solution = _smooth_reference(problem, tol, x0, max_iters)
    else:
        solution = _nonsmooth_reference(problem, tol, x0, max_iters)
    if not solution.certified:
        logger.warning(
            f"reference for {problem.name} relies on radius estimate "
            f"R={solution.radius:.4g}; gap bound is not certified"
        )
    logger.debug(
        f"reference {problem.name}: phi_ref={solution.phi_ref:.15g} "
        f"bound={solution.gap_bound:.3e} iters={solution.iterations}"
    )
    return solution


def get_cached_reference(problem: CompositeProblem, tol: float) -> ReferenceSolution:
    """Get or compute the reference solution for (problem, tol).

    Solutions are cached by problem fingerprint and tolerance, so problems
    built from the same data share one solve.

    Args:
        problem: Composite problem.
        tol: Target gap.

    Returns:
        Cached ReferenceSolution.
    """
    cache_key = (fingerprint(problem), float(tol))

    with _reference_lock:
        if cache_key not in _reference_cache:
            logger.debug(f"Computing reference for {problem.name} (tol={tol:g})")
            _reference_cache[cache_key] = reference_solve(problem, tol)
        else:
            logger.debug(f"Using cached reference for {problem.name} (tol={tol:g})")

        return _reference_cache[cache_key]


def clear_reference_cache() -> None:
    """Clear the reference cache."""
    with _reference_lock:
        _reference_cache.clear()
        logger.info("Reference cache cleared")


def get_reference_cache_size() -> int:
    """Get the number of cached reference solutions.

    Returns:
        Number of cached entries.
    """
    with _reference_lock:
        return len(_reference_cache)
