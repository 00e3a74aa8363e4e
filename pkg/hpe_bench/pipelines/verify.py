"""Instrumented verification runs feeding the invariant suites."""
from __future__ import annotations

import numpy as np

from hpe_bench.config import MethodSpec, ProblemDescriptor, SolverSettings
from hpe_bench.core.bundle import BundleConfig, MpbTrace, hpe_solve
from hpe_bench.core.exceptions import ValidationError
from hpe_bench.core.invariants import (
    InvariantReport,
    InvariantTracker,
    check_mpb_trace,
    check_restart_trace,
    check_run_rows,
)
from hpe_bench.core.logger import get_logger
from hpe_bench.core.restart_acg import RestartConfig, RestartTrace, solve
from hpe_bench.pipelines.experiment import reference_for, resolve_lambda, starting_point

logger = get_logger("verify")

INSTRUMENTED_METHODS = ("restart_acg", "mpb")


def verify_invariants(
    *,
    problem: ProblemDescriptor,
    method: MethodSpec,
    reference_tol: float = 1e-10,
    samples: int = 50,
    ppm_samples: int = 5,
    rng_seed: int = 0,
) -> InvariantReport:
    """Run one instrumented solve and evaluate every invariant on its recorder.

    Restart ACG runs check the outer, inner (ACG) and relative-prox suites; MPB
    runs check the bundle suite. Both check the emitted trace rows.

    Args:
        problem: Problem descriptor.
        method: Cell to run; must be ``restart_acg`` or ``mpb``.
        reference_tol: Tolerance of the reference solve.
        samples: Random sample points per step for the minorant checks.
        ppm_samples: Outer steps checked against a nested subproblem solve.
        rng_seed: Seed of the sampling generator.

    Returns:
        InvariantReport. Violations are report content, not exceptions.

    Raises:
        ValidationError: If the method has no instrumented recorder.
    """
    if method.solver not in INSTRUMENTED_METHODS:
        raise ValidationError(f"no instrumented run for method '{method.solver}'")
    instance = problem.build()
    x0 = starting_point(instance)
    reference = reference_for(instance, reference_tol)
    d0 = float(np.linalg.norm(x0 - reference.x_ref))
    s: SolverSettings = method.settings
    lam = resolve_lambda(instance, s, d0)
    tracker = InvariantTracker()
    rng = np.random.default_rng(rng_seed)

    if method.solver == "restart_acg":
        trace = RestartTrace()
        config = RestartConfig(sigma=s.sigma, max_inner=s.max_inner, max_outer=s.max_outer)
        run = solve(
            instance,
            x0,
            lam,
            s.eps_bar,
            config,
            phi_ref=reference.phi_ref,
            d0_estimate=d0,
            trace=trace,
        )
        check_restart_trace(
            trace,
            instance,
            tracker,
            rng,
            phi_ref=reference.phi_ref,
            d0=d0,
            rate_tol=10.0 * reference_tol,
            ppm_samples=ppm_samples,
            nested_tol=reference_tol,
            samples=samples,
        )
    else:
        trace = MpbTrace()
        config = BundleConfig(
            max_inner=s.max_inner,
            max_outer=s.max_outer,
            max_cuts=s.max_cuts,
            dual_tol=s.dual_tol,
            budget_constant=s.budget_constant,
        )
        run = hpe_solve(
            instance,
            x0,
            lam,
            s.delta,
            s.eps_bar,
            config,
            phi_ref=reference.phi_ref,
            d0_estimate=d0 or None,
            trace=trace,
        )
        check_mpb_trace(trace, instance, tracker, rng, samples=samples)

    check_run_rows(method.solver, run, tracker)
    report = tracker.report()
    if report.passed:
        logger.info(f"{method.label}: {len(report.results)} invariants passed")
    else:
        logger.error(f"{method.label}: violated {', '.join(report.failures())}")
    return report
