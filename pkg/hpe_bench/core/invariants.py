"""Runnable invariant suites for instrumented ACG, restart ACG and MPB runs.

Every check reports a slack; a check passes when its slack is nonnegative.
The tracker keeps the worst slack per named invariant across a run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from hpe_bench.core.acg import (
    AcgTrace,
    gamma_argmin,
    gamma_argmin_regularized,
    regularized_model_min,
)
from hpe_bench.core.bundle import MpbTrace, exact_prox
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import (
    CompositeProblem,
    MaxAffine,
    ProxFriendlyTerm,
    eval_phi,
    proximal_subproblem,
)
from hpe_bench.core.reference import reference_solve
from hpe_bench.core.restart_acg import RestartTrace, inner_iteration_bound
from hpe_bench.core.types import HpeTriple, RunTrace

logger = get_logger("invariants")

IDENTITY_RTOL = 1e-10
CERTIFICATE_RTOL = 1e-8
MINORANT_RTOL = 1e-9
GROWTH_SLACK = 1e-12


@dataclass
class InvariantResult:
    """Worst observed slack for one named invariant.

    Attributes:
        name: Invariant name.
        worst_slack: Smallest slack seen; negative means violated.
        checks: Number of evaluations.
    """

    name: str
    worst_slack: float = math.inf
    checks: int = 0

    @property
    def passed(self) -> bool:
        """Return True if no evaluation was violated."""
        return self.worst_slack >= 0.0


@dataclass
class InvariantReport:
    """Pass/fail table of a verification run."""

    results: dict[str, InvariantResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Return True if every invariant passed."""
        return all(r.passed for r in self.results.values())

    def failures(self) -> list[str]:
        """Return names of violated invariants."""
        return [name for name, r in self.results.items() if not r.passed]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready view."""
        return {
            "passed": self.passed,
            "invariants": {
                name: {
                    "passed": r.passed,
                    "worst_slack": r.worst_slack if math.isfinite(r.worst_slack) else None,
                    "checks": r.checks,
                }
                for name, r in sorted(self.results.items())
            },
        }


class InvariantTracker:
    """Accumulates slacks per invariant name."""

    def __init__(self) -> None:
        """Start with no results."""
        self._results: dict[str, InvariantResult] = {}

    def check(self, name: str, slack: float) -> bool:
        """Record one evaluation.

        Args:
            name: Invariant name.
            slack: Nonnegative when the invariant holds. NaN counts as violated.

        Returns:
            True if this evaluation passed.
        """
        result = self._results.setdefault(name, InvariantResult(name))
        if math.isnan(slack):
            slack = -math.inf
        result.worst_slack = min(result.worst_slack, slack)
        result.checks += 1
        if slack < 0:
            logger.debug(f"invariant {name} violated: slack={slack:.3e}")
        return slack >= 0

    def check_close(self, name: str, lhs: float, rhs: float, rtol: float, scale: float) -> bool:
        """Record ``|lhs - rhs| <= rtol * scale``."""
        return self.check(name, rtol * scale - abs(lhs - rhs))

    def report(self) -> InvariantReport:
        """Return the report accumulated so far."""
        return InvariantReport(dict(self._results))


def sample_points(
    rng: np.random.Generator,
    center: np.ndarray,
    spread: float,
    h: ProxFriendlyTerm,
    count: int,
) -> list[np.ndarray]:
    """Draw Gaussian points around center, pulled into dom h when needed."""
    points = []
    for _ in range(count):
        u = center + spread * rng.standard_normal(center.shape[0])
        if not math.isfinite(h.value_at(u)):
            u = h.prox_at(u, 1.0)
        points.append(u)
    return points


def check_subgradient_samples(
    name: str,
    problem: CompositeProblem,
    triple: HpeTriple,
    tracker: InvariantTracker,
    rng: np.random.Generator,
    count: int = 20,
    spread: float | None = None,
) -> None:
    """Check ``phi(u) >= phi(w) + <u_k, u - w> - eta`` at sampled u."""
    w = triple.w_tilde
    phi_w = eval_phi(problem, w)
    spread = spread if spread is not None else max(1.0, float(np.linalg.norm(w)))
    for u in sample_points(rng, w, spread, problem.h, count):
        phi_u = eval_phi(problem, u)
        lin = float(triple.u @ (u - w))
        scale = 1.0 + abs(phi_u) + abs(phi_w) + abs(lin)
        tracker.check(name, phi_u - (phi_w + lin - triple.eta) + MINORANT_RTOL * scale)


def check_acg_trace(
    trace: AcgTrace,
    tracker: InvariantTracker,
    rng: np.random.Generator,
    samples: int = 50,
    prefix: str = "acg",
) -> None:
    """Run the ACG suite over every recorded step.

    Args:
        trace: Recorder filled by an ACG run.
        tracker: Destination of the slacks.
        rng: Generator for sample points.
        samples: Sample points per step for the minorant checks.
        prefix: Name prefix.
    """
    params = trace.params
    L, mu, lam = params.L, params.mu, params.lam
    x0 = params.prox_center_x0
    growth_rate = (1.0 + math.sqrt(mu) / (2.0 * math.sqrt(L))) ** 2

    for idx, r in enumerate(trace.steps):
        for A, tau in ((r.A, r.tau), (r.A_next, r.tau_next)):
            expected = (1.0 + mu * A) / L
            tracker.check_close(f"{prefix}.tau_identity", tau, expected, IDENTITY_RTOL, abs(expected))
        a_sq = r.a * r.a
        tracker.check_close(f"{prefix}.a_root", r.A_next * r.tau, a_sq, IDENTITY_RTOL, a_sq)

        j = r.j + 1
        growth = max(j * j / (4.0 * L), growth_rate ** (j - 1) / L)
        tracker.check(f"{prefix}.A_growth", r.A_next - growth + GROWTH_SLACK * max(1.0, growth))

        x_closed = gamma_argmin_regularized(r.Gamma_next, r.A_next, x0)
        gap = float(np.linalg.norm(r.x_next - x_closed))
        tracker.check(f"{prefix}.x_argmin", 1e-8 * (1.0 + float(np.linalg.norm(r.x_next))) - gap)

        tracker.check(
            f"{prefix}.psi_monotone",
            r.psi_prev - r.psi_next if math.isfinite(r.psi_prev) else 0.0,
        )

        gamma_at = r.gamma.value_at(r.y_tilde)
        tracker.check_close(
            f"{prefix}.gamma_touch",
            r.gamma_tilde_at_y_tilde,
            gamma_at,
            MINORANT_RTOL,
            1.0 + abs(gamma_at),
        )

        # Both prox-linear models share their minimum value, attained at y_tilde.
        dy = r.y_tilde - r.x_tilde
        tilde_min = r.gamma_tilde_at_y_tilde + 0.5 * L * float(dy @ dy)
        grad = r.gamma.gradient_at(r.y_tilde) + L * dy
        u_star = r.y_tilde - grad / (mu + L)
        du = u_star - r.x_tilde
        quad_min = r.gamma.value_at(u_star) + 0.5 * L * float(du @ du)
        tracker.check_close(
            f"{prefix}.equal_minima", tilde_min, quad_min, MINORANT_RTOL, 1.0 + abs(tilde_min)
        )

        rhs = regularized_model_min(r.Gamma_next, r.A_next, x0)
        lhs = r.A_next * r.psi_next
        tracker.check(f"{prefix}.induction", rhs - lhs + 1e-8 * (1.0 + abs(lhs)))

        spread = max(1.0, float(np.linalg.norm(r.y_tilde - x0)))
        for u in sample_points(rng, r.y_tilde, spread, trace.h, samples):
            g_u = r.gamma.value_at(u)
            gt_u = trace.gamma_tilde(r, u)
            psi_u = trace.psi(u)
            Gamma_u = r.Gamma_next.value_at(u)
            scale = 1.0 + abs(g_u) + abs(gt_u) + abs(psi_u)
            tracker.check(f"{prefix}.gamma_below_tilde", gt_u - g_u + MINORANT_RTOL * scale)
            tracker.check(f"{prefix}.tilde_below_psi", psi_u - gt_u + MINORANT_RTOL * scale)
            tracker.check(
                f"{prefix}.Gamma_below_psi",
                psi_u - Gamma_u + MINORANT_RTOL * (scale + abs(Gamma_u)),
            )

        if idx < len(trace.certificates) and math.isfinite(lam):
            _check_certificate(trace, r, trace.certificates[idx], tracker, prefix)


def _check_certificate(trace, r, cert, tracker: InvariantTracker, prefix: str) -> None:
    lam = trace.params.lam
    x0 = trace.params.prox_center_x0
    A = r.A_next
    psi_y = r.psi_next
    Gamma_x = r.Gamma_next.value_at(r.x_next)

    lam_v = lam * cert.v
    lhs = cert.residual_sq + 2.0 * lam * cert.eps
    rhs = float(lam_v @ lam_v) + 2.0 * lam * (psi_y - Gamma_x)
    scale = (
        cert.residual_sq
        + 2.0 * lam * abs(cert.eps)
        + float(lam_v @ lam_v)
        + 2.0 * lam * (abs(psi_y) + abs(Gamma_x))
    )
    tracker.check_close(f"{prefix}.certificate_identity", lhs, rhs, CERTIFICATE_RTOL, scale)
    tracker.check(f"{prefix}.eps_nonnegative", cert.eps + 1e-12 * (1.0 + abs(psi_y)))

    if A >= 3.0 * lam:
        dy = float(np.linalg.norm(r.y_next - x0))
        tracker.check(
            f"{prefix}.v_bound",
            3.0 * dy / (2.0 * A) + 1e-10 - float(np.linalg.norm(cert.v)),
        )
        x_hat = gamma_argmin(r.Gamma_next)
        dx = x_hat - x0
        bound = float(dx @ dx) / (2.0 * A)
        value = psi_y - r.Gamma_next.value_at(x_hat)
        tracker.check(f"{prefix}.model_gap", bound - value + 1e-9 * (1.0 + abs(psi_y)))


def check_restart_trace(
    trace: RestartTrace,
    problem: CompositeProblem,
    tracker: InvariantTracker,
    rng: np.random.Generator,
    phi_ref: float | None = None,
    d0: float | None = None,
    rate_tol: float = 0.0,
    ppm_samples: int = 0,
    nested_tol: float = 1e-10,
    samples: int = 50,
) -> None:
    """Run the restart ACG suite, including the nested ACG suites.

    Args:
        trace: Recorder filled by ``restart_acg.solve``.
        problem: Problem the run solved.
        tracker: Destination of the slacks.
        rng: Generator for sample points.
        phi_ref: Reference value for the outer rate check.
        d0: ``||w_0 - x_ref||`` for the outer rate check.
        rate_tol: Additive tolerance of the rate check.
        ppm_samples: Outer steps on which to run the nested prox check.
        nested_tol: Tolerance of the nested subproblem solves.
        samples: Sample points per ACG step.
    """
    L = problem.smooth_part.lipschitz_L
    prev_phi = math.inf
    for rec in trace.outer:
        lam = rec.lam
        resid = rec.b * rec.b - lam * rec.b - lam * rec.B_prev
        tracker.check_close("restart.b_root", resid, 0.0, 1e-12, rec.b * rec.b)
        growth = rec.k * rec.k * lam / 4.0
        tracker.check("restart.B_growth", rec.B - growth + GROWTH_SLACK * max(1.0, growth))
        tracker.check("restart.phi_monotone", prev_phi - rec.phi_at_w if math.isfinite(prev_phi) else 0.0)
        prev_phi = rec.phi_at_w

        t = rec.triple
        tracker.check("restart.criterion", t.criterion_rhs - t.criterion_lhs(lam))
        check_subgradient_samples("restart.eps_subgradient", problem, t, tracker, rng)
        if lam * L >= 1.0:
            tracker.check("restart.inner_bound", float(inner_iteration_bound(lam, L) - rec.inner_iters))
        if phi_ref is not None and d0 is not None:
            bound = 2.0 * d0 * d0 / (lam * rec.k * rec.k)
            tracker.check("restart.outer_rate", bound + rate_tol - (rec.phi_at_w - phi_ref))
        if rec.acg is not None:
            check_acg_trace(rec.acg, tracker, rng, samples=samples)

    if ppm_samples > 0 and trace.outer:
        picks = rng.choice(len(trace.outer), size=min(ppm_samples, len(trace.outer)), replace=False)
        for i in sorted(picks):
            rec = trace.outer[int(i)]
            lam, zt, w = rec.lam, rec.z_tilde, rec.triple.w_tilde
            sub = proximal_subproblem(problem, zt, lam)
            z_hat = reference_solve(sub, nested_tol, x0=w).x_ref
            sigma = rec.sigma
            dw, dz = w - zt, z_hat - zt
            lhs = (
                eval_phi(problem, w) + float(dw @ dw) / (2.0 * lam)
                - eval_phi(problem, z_hat) - float(dz @ dz) / (2.0 * lam)
            )
            rhs = sigma * float(dw @ dw) / (2.0 * lam)
            tracker.check("restart.relative_prox", rhs + 10.0 * nested_tol - lhs)


def check_mpb_trace(
    trace: MpbTrace,
    problem: CompositeProblem,
    tracker: InvariantTracker,
    rng: np.random.Generator,
    samples: int = 50,
    prox_samples: int = 5,
) -> None:
    """Run the MPB suite over every recorded outer step.

    For a max-affine f, ``m_j <= psi(z_hat)`` is also checked on up to
    ``prox_samples`` evenly spaced outer steps, with z_hat the exact prox
    subproblem minimizer.

    Args:
        trace: Recorder filled by ``hpe_solve``.
        problem: Problem the run solved.
        tracker: Destination of the slacks.
        rng: Generator for sample points.
        samples: Sample points per outer step.
        prox_samples: Outer steps checked against the exact prox value.
    """
    f = problem.nonsmooth_part
    for rec in trace.inner:
        res, triple = rec.result, rec.triple
        lam, x0, delta = rec.lam, rec.x0, rec.delta

        tracker.check("mpb.gap_closed", delta - res.t_j)
        tracker.check("mpb.criterion", triple.criterion_rhs - triple.criterion_lhs(lam))

        last = rec.prox_results[-1]
        theta = last.theta
        cut_vals = np.array([c.value_at(res.x_j) for c in rec.model_cuts])
        model_x = float(theta @ cut_vals) + problem.h.value_at(res.x_j)
        phi_t = eval_phi(problem, res.x_tilde)
        dt = res.x_tilde - x0
        t_j = phi_t + float(dt @ dt) / (2.0 * lam) - res.m_j
        eps = phi_t - model_x + float((x0 - res.x_j) @ (res.x_j - res.x_tilde)) / lam
        r = res.x_j - res.x_tilde
        lhs = float(r @ r) + 2.0 * lam * eps
        scale = float(r @ r) + 2.0 * lam * (abs(eps) + abs(phi_t) + abs(model_x) + abs(res.m_j))
        tracker.check_close("mpb.certificate_identity", lhs, 2.0 * lam * t_j, CERTIFICATE_RTOL, scale)

        for prox in rec.prox_results:
            tracker.check_close("mpb.theta_simplex", float(prox.theta.sum()), 1.0, 1e-12, 1.0)
            tracker.check("mpb.theta_nonnegative", float(prox.theta.min()))
            tracker.check(
                "mpb.weak_duality",
                prox.primal_value - prox.m_j + 1e-10 * (1.0 + abs(prox.m_j)),
            )

        prev = math.inf
        for _, _, phi_best in rec.t_history:
            tracker.check("mpb.best_monotone", prev - phi_best if math.isfinite(prev) else 0.0)
            prev = phi_best

        spread = max(1.0, float(np.linalg.norm(res.x_j - x0)))
        for u in sample_points(rng, x0, spread, problem.h, samples):
            f_u = f.value_at(u)
            for cut in rec.cuts:
                l_u = cut.value_at(u)
                tracker.check("mpb.cut_valid", f_u - l_u + 1e-9 * (1.0 + abs(f_u) + abs(l_u)))
            du = u - x0
            psi_u = eval_phi(problem, u) + float(du @ du) / (2.0 * lam)
            tracker.check("mpb.lower_bound", psi_u - res.m_j + 1e-9 * (1.0 + abs(psi_u)))

        check_subgradient_samples("mpb.eps_subgradient", problem, triple, tracker, rng)

    if prox_samples > 0 and trace.inner and isinstance(f, MaxAffine):
        count = min(prox_samples, len(trace.inner))
        for i in np.unique(np.linspace(0, len(trace.inner) - 1, count).round().astype(int)):
            rec = trace.inner[int(i)]
            z_hat = exact_prox(problem, rec.x0, rec.lam).x_j
            dz = z_hat - rec.x0
            psi_hat = eval_phi(problem, z_hat) + float(dz @ dz) / (2.0 * rec.lam)
            tracker.check("mpb.prox_lower_bound", psi_hat - rec.result.m_j + 1e-9 * (1.0 + abs(psi_hat)))


def check_run_rows(name: str, run: RunTrace, tracker: InvariantTracker) -> None:
    """Check that trace rows are ordered and the reported phi never increases."""
    prev = None
    for row in run.rows:
        if prev is not None:
            tracker.check(f"{name}.rows_ordered", float(row.k - prev.k))
            tracker.check(f"{name}.calls_monotone", float(row.oracle_calls - prev.oracle_calls))
            tracker.check(f"{name}.phi_monotone", prev.phi - row.phi)
        prev = row
