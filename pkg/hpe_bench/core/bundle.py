"""Modern proximal bundle method (MPB) as an inner engine of the HPE framework.

The inner loop grows a cutting-plane model of f around a fixed prox center x0,
solves the model prox subproblem through its dual over the simplex and stops
when the gap ``t_j = psi(x_tilde_j) - m_j`` drops below delta. The outer loop
turns the last inner iterate into an HPE triple and moves the center there.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hpe_bench.core.exceptions import BudgetExhaustedError, ModelDomainError, ValidationError
from hpe_bench.core.file_io import atomic_write_text
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import CompositeProblem, MaxAffine, ProxFriendlyTerm, eval_phi
from hpe_bench.core.types import HpeTriple, RunStatus, RunTrace, TraceRow
from hpe_bench.core.validation import (
    validate_count,
    validate_dimension,
    validate_positive,
)

logger = get_logger("bundle")


@dataclass(frozen=True, eq=False)
class Cut:
    """Linearization ``l(u) = value + <slope, u - anchor>`` of f at anchor."""

    anchor: np.ndarray
    value: float
    slope: np.ndarray

    def value_at(self, u: np.ndarray) -> float:
        """Evaluate the cut at u."""
        return self.value + float(self.slope @ (u - self.anchor))


@dataclass
class Bundle:
    """Cutting-plane model ``Gamma(u) = max_i l_i(u)``.

    Attributes:
        cuts: Cuts in insertion order.
        max_cuts: Cap on the number of cuts; the oldest is dropped first.
    """

    cuts: list[Cut] = field(default_factory=list)
    max_cuts: int | None = None

    def __len__(self) -> int:
        return len(self.cuts)

    def add(self, cut: Cut) -> bool:
        """Append a cut.

        Args:
            cut: New linearization.

        Returns:
            True if the oldest cut was dropped to respect max_cuts.
        """
        self.cuts.append(cut)
        if self.max_cuts is not None and len(self.cuts) > self.max_cuts:
            self.cuts.pop(0)
            return True
        return False

    def anchors(self) -> np.ndarray:
        """Return the anchors as rows."""
        return np.array([c.anchor for c in self.cuts])

    def slopes(self) -> np.ndarray:
        """Return the slopes as rows."""
        return np.array([c.slope for c in self.cuts])

    def values(self) -> np.ndarray:
        """Return the values f(anchor_i)."""
        return np.array([c.value for c in self.cuts])

    def cut_values_at(self, u: np.ndarray) -> np.ndarray:
        """Return the vector of l_i(u)."""
        return self.values() + np.einsum("ij,ij->i", self.slopes(), u - self.anchors())

    def value_at(self, u: np.ndarray) -> float:
        """Evaluate Gamma(u)."""
        return float(np.max(self.cut_values_at(u)))


@dataclass(frozen=True, eq=False)
class ModelProxResult:
    """Solution of the model prox subproblem.

    Attributes:
        x_j: Primal point u(theta).
        m_j: Dual value d(theta), a lower bound on the subproblem minimum.
        theta: Simplex weights over the cuts.
        dual_gap: Primal model objective at x_j minus m_j.
        primal_value: ``Gamma(x_j) + h(x_j) + ||x_j - x0||^2 / (2 lam)``.
        model_value: ``sum_i theta_i l_i(x_j) + h(x_j)``, the aggregate
            minorant at x_j.
        iterations: Conditional-gradient iterations used.
    """

    x_j: np.ndarray
    m_j: float
    theta: np.ndarray
    dual_gap: float
    primal_value: float
    model_value: float
    iterations: int


def solve_model_prox(
    bundle: Bundle,
    h: ProxFriendlyTerm,
    x0: np.ndarray,
    lam: float,
    dual_tol: float,
    theta0: np.ndarray | None = None,
    max_iter: int = 1000,
) -> ModelProxResult:
    """Solve ``min Gamma(u) + h(u) + ||u - x0||^2 / (2 lam)`` through its dual.

    The dual ``max_theta d(theta)`` over the simplex is solved by away-step
    conditional gradient. Each dual evaluation is one prox of h at
    ``x0 - lam * sum_i theta_i slope_i``; the gradient of d is the vector of
    cut values at that prox point. The step along a direction D is
    ``min(t_max, <grad d, D> / (lam ||sum_i D_i slope_i||^2))``.

    Args:
        bundle: Nonempty bundle.
        h: Prox-friendly term.
        x0: Prox center.
        lam: Prox stepsize.
        dual_tol: Stop once the simplex gap falls below this.
        theta0: Starting weights; defaults to the newest cut.
        max_iter: Cap on conditional-gradient iterations.

    Returns:
        ModelProxResult; m_j is a valid lower bound even when the cap is hit.

    Raises:
        ValidationError: If the bundle is empty or lam, dual_tol are not positive.
    """
    if len(bundle) == 0:
        raise ValidationError("bundle must hold at least one cut")
    validate_positive(lam, "lam")
    validate_positive(dual_tol, "dual_tol")
    x0 = np.asarray(x0, dtype=float)

    S = bundle.slopes()
    m = S.shape[0]
    if theta0 is None:
        theta = np.zeros(m)
        theta[-1] = 1.0
    else:
        theta = np.array(theta0, dtype=float)
        if theta.shape != (m,):
            raise ValidationError(f"theta0 must have shape ({m},), got {theta.shape}")
        theta = np.maximum(theta, 0.0)
        theta /= theta.sum()

    u = h.prox_at(x0 - lam * (S.T @ theta), lam)
    it = 0
    for it in range(1, max_iter + 1):
        g = bundle.cut_values_at(u)
        lin = float(g @ theta)
        i_fw = int(np.argmax(g))
        fw_gap = float(g[i_fw]) - lin
        if fw_gap <= dual_tol:
            break

        active = np.flatnonzero(theta > 0.0)
        i_aw = int(active[np.argmin(g[active])])
        away_gap = lin - float(g[i_aw])

        if fw_gap >= away_gap:
            D = -theta.copy()
            D[i_fw] += 1.0
            t_max, slope, away = 1.0, fw_gap, False
        else:
            D = theta.copy()
            D[i_aw] -= 1.0
            t_max = theta[i_aw] / (1.0 - theta[i_aw])
            slope, away = away_gap, True

        sd = S.T @ D
        curvature = lam * float(sd @ sd)
        t = t_max if curvature <= 0.0 else min(t_max, slope / curvature)
        theta = theta + t * D
        if away and t == t_max:
            theta[i_aw] = 0.0
        theta = np.maximum(theta, 0.0)
        theta /= theta.sum()
        u = h.prox_at(x0 - lam * (S.T @ theta), lam)
    else:
        logger.debug(f"dual solver hit max_iter={max_iter}")

    g = bundle.cut_values_at(u)
    du = u - x0
    prox_term = float(du @ du) / (2.0 * lam)
    h_u = h.value_at(u)
    model_value = float(g @ theta) + h_u
    m_j = model_value + prox_term
    primal_value = float(np.max(g)) + h_u + prox_term
    return ModelProxResult(
        x_j=u,
        m_j=m_j,
        theta=theta,
        dual_gap=primal_value - m_j,
        primal_value=primal_value,
        model_value=model_value,
        iterations=it,
    )


def piece_bundle(problem: CompositeProblem) -> Bundle:
    """Return the bundle holding one cut per affine piece; its model is f itself.

    Raises:
        ModelDomainError: If f is not a MaxAffine.
    """
    f = problem.nonsmooth_part
    if not isinstance(f, MaxAffine):
        raise ModelDomainError("piece_bundle needs a max-affine f")
    origin = np.zeros(problem.dimension)
    return Bundle(cuts=[Cut(anchor=origin, value=float(c), slope=g) for g, c in zip(f.G, f.c)])


def exact_prox(
    problem: CompositeProblem,
    center: np.ndarray,
    lam: float,
    dual_tol: float = 1e-12,
    max_iter: int = 100_000,
) -> ModelProxResult:
    """Solve ``min phi(u) + ||u - center||^2 / (2 lam)`` for a max-affine f.

    The model prox over ``piece_bundle`` is the true prox subproblem, so
    ``x_j`` is its minimizer up to ``dual_gap`` and ``m_j`` a lower bound on
    its value.

    Args:
        problem: Max-affine composite problem.
        center: Prox center.
        lam: Prox stepsize.
        dual_tol: Dual solver tolerance.
        max_iter: Cap on dual solver iterations.

    Returns:
        ModelProxResult of the exact subproblem.
    """
    return solve_model_prox(
        piece_bundle(problem), problem.h, np.asarray(center, dtype=float), lam, dual_tol, max_iter=max_iter
    )


@dataclass(frozen=True)
class BundleConfig:
    """Knobs of MPB and its HPE outer loop.

    Attributes:
        max_inner: Cap on bundle iterations per outer step.
        max_outer: Cap on outer steps.
        max_cuts: Bundle cap (None for unbounded).
        dual_tol: Dual solver tolerance; None means delta / 10.
        dual_max_iter: Cap on dual solver iterations.
        budget_constant: C in the oracle budget ``ceil(C M^2 d0^2 / eps_bar^2)``.
        max_oracle_calls: Explicit oracle budget overriding the formula.
    """

    max_inner: int = 10_000
    max_outer: int = 100_000
    max_cuts: int | None = None
    dual_tol: float | None = None
    dual_max_iter: int = 1000
    budget_constant: float = 8.0
    max_oracle_calls: int | None = None

    def __post_init__(self) -> None:
        """Validate the knobs."""
        validate_count(self.max_inner, "max_inner")
        validate_count(self.max_outer, "max_outer")
        validate_count(self.dual_max_iter, "dual_max_iter")
        if self.max_cuts is not None:
            validate_count(self.max_cuts, "max_cuts", minimum=2)
        if self.dual_tol is not None:
            validate_positive(self.dual_tol, "dual_tol")
        validate_positive(self.budget_constant, "budget_constant")
        if self.max_oracle_calls is not None:
            validate_count(self.max_oracle_calls, "max_oracle_calls")


@dataclass(frozen=True, eq=False)
class InnerResult:
    """Outcome of one MPB inner loop.

    Attributes:
        x_j: Last primal point.
        x_tilde: Best point by psi over {x0, x_1, ..., x_j}.
        m_j: Lower bound used in the last gap test.
        t_j: Last gap ``psi(x_tilde) - m_j``.
        j: Bundle iterations taken.
        bundle: Bundle after the last cut was added.
        model_value: Aggregate minorant ``l_theta + h`` at x_j.
        phi_at_x_tilde: phi(x_tilde).
        phi_at_x_j: phi(x_j).
        last_cut: Cut at x_j.
        oracle_calls: f evaluations made.
        history: ``(j, t_j, phi(x_tilde_j))`` for every bundle iteration so far.
    """

    x_j: np.ndarray
    x_tilde: np.ndarray
    m_j: float
    t_j: float
    j: int
    bundle: Bundle
    model_value: float
    phi_at_x_tilde: float
    phi_at_x_j: float
    last_cut: Cut
    oracle_calls: int
    history: tuple[tuple[int, float, float], ...] = ()


@dataclass
class InnerRecord:
    """What one outer MPB step did, for the invariant suites."""

    k: int
    x0: np.ndarray
    lam: float
    delta: float
    cuts: list[Cut] = field(default_factory=list)
    model_cuts: list[Cut] = field(default_factory=list)
    prox_results: list[ModelProxResult] = field(default_factory=list)
    t_history: list[tuple[int, float, float]] = field(default_factory=list)
    result: InnerResult | None = None
    triple: HpeTriple | None = None


@dataclass
class MpbState:
    """Outer state of the HPE loop driven by MPB.

    Attributes:
        k: Outer steps taken.
        w: Current outer iterate w_k.
        lam: Prox stepsize.
        delta: Inner gap tolerance.
        inner_history: ``(j, t_j, phi(x_tilde_j))`` of the last inner loop.
    """

    k: int
    w: np.ndarray
    lam: float
    delta: float
    inner_history: tuple[tuple[int, float, float], ...] = ()

    def advance(self, inner: InnerResult) -> None:
        """Move to ``w_{k+1} = x_j`` and keep the gap history of the inner loop."""
        self.k += 1
        self.w = inner.x_j
        self.inner_history = inner.history


@dataclass
class MpbTrace:
    """Instrumentation recorder for an MPB run."""

    inner: list[InnerRecord] = field(default_factory=list)


def _cut_at(problem: CompositeProblem, x: np.ndarray) -> Cut:
    value, slope = problem.f_value_and_slope(x)
    return Cut(anchor=np.array(x, dtype=float), value=value, slope=np.asarray(slope))


def mpb_inner(
    problem: CompositeProblem,
    x0: np.ndarray,
    lam: float,
    delta: float,
    config: BundleConfig | None = None,
    first_cut: Cut | None = None,
    record: InnerRecord | None = None,
) -> InnerResult:
    """Run the bundle loop on ``psi = phi + ||. - x0||^2 / (2 lam)`` until t_j <= delta.

    Args:
        problem: Nonsmooth composite problem.
        x0: Prox center, in dom h.
        lam: Prox stepsize.
        delta: Gap tolerance.
        config: Knobs.
        first_cut: Cut at x0 already evaluated by the caller.
        record: Optional recorder for this inner loop.

    Returns:
        InnerResult.

    Raises:
        ValidationError: If the problem is not nonsmooth or x0 is outside dom h.
        BudgetExhaustedError: If max_inner iterations do not close the gap;
            ``partial`` holds the best InnerResult.
    """
    if problem.nonsmooth_part is None:
        raise ValidationError("MPB needs a nonsmooth problem")
    validate_positive(lam, "lam")
    validate_positive(delta, "delta")
    config = config or BundleConfig()
    dual_tol = config.dual_tol if config.dual_tol is not None else delta / 10.0
    x0 = np.asarray(x0, dtype=float)

    calls = 0
    if first_cut is None:
        first_cut = _cut_at(problem, x0)
        calls += 1
    h_x0 = problem.h.value_at(x0)
    if not math.isfinite(h_x0):
        raise ValidationError("x0 must lie in dom h")

    bundle = Bundle(max_cuts=config.max_cuts)
    bundle.add(first_cut)
    x_tilde = x0
    phi_tilde = first_cut.value + h_x0
    psi_tilde = phi_tilde

    theta = None
    history: list[tuple[int, float, float]] = []
    best: InnerResult | None = None
    for j in range(1, config.max_inner + 1):
        if record is not None:
            record.model_cuts = list(bundle.cuts)
        prox = solve_model_prox(
            bundle, problem.h, x0, lam, dual_tol, theta, config.dual_max_iter
        )
        cut = _cut_at(problem, prox.x_j)
        calls += 1
        phi_j = cut.value + problem.h.value_at(prox.x_j)
        d = prox.x_j - x0
        psi_j = phi_j + float(d @ d) / (2.0 * lam)
        if psi_j <= psi_tilde:
            x_tilde, phi_tilde, psi_tilde = prox.x_j, phi_j, psi_j

        dropped = bundle.add(cut)
        theta = np.append(prox.theta, 0.0)
        if dropped:
            theta = theta[1:]
            if theta.sum() <= 0.0:
                theta = None

        t_j = psi_tilde - prox.m_j
        history.append((j, t_j, phi_tilde))
        result = InnerResult(
            x_j=prox.x_j,
            x_tilde=x_tilde,
            m_j=prox.m_j,
            t_j=t_j,
            j=j,
            bundle=bundle,
            model_value=prox.model_value,
            phi_at_x_tilde=phi_tilde,
            phi_at_x_j=phi_j,
            last_cut=cut,
            oracle_calls=calls,
            history=tuple(history),
        )
        if record is not None:
            record.prox_results.append(prox)
            record.t_history = list(history)
        if t_j <= delta:
            logger.debug(f"MPB inner done at j={j} t={t_j:.3e} cuts={len(bundle)}")
            if record is not None:
                record.cuts = list(bundle.cuts)
                record.result = result
            return result
        if best is None or t_j < best.t_j:
            best = result

    logger.error(f"MPB inner hit max_inner={config.max_inner} (best t={best.t_j:.3e})")
    raise BudgetExhaustedError(
        f"MPB inner exceeded max_inner={config.max_inner}", partial=best
    )


def mpb_certificate(
    x0: np.ndarray,
    x_j: np.ndarray,
    x_tilde: np.ndarray,
    m_j: float,
    lam: float,
    problem: CompositeProblem,
    delta: float,
    phi_at_x_tilde: float | None = None,
) -> HpeTriple:
    """Turn a finished inner loop into the HPE triple (x_tilde, u, eta).

    With ``u = (x0 - x_j) / lam`` and ``t_j = psi(x_tilde) - m_j`` the error is
    ``eta = t_j - ||x_j - x_tilde||^2 / (2 lam)``, so that
    ``||lam u + x_tilde - x0||^2 + 2 lam eta = 2 lam t_j``.

    Args:
        x0: Prox center of the inner loop.
        x_j: Last primal point.
        x_tilde: Best point.
        m_j: Lower bound from the last model solve.
        lam: Prox stepsize.
        problem: Composite problem (used when phi_at_x_tilde is missing).
        delta: Gap tolerance; the criterion right-hand side is 2 lam delta.
        phi_at_x_tilde: phi(x_tilde) if already known.

    Returns:
        HpeTriple.
    """
    x0 = np.asarray(x0, dtype=float)
    if phi_at_x_tilde is None:
        phi_at_x_tilde = eval_phi(problem, x_tilde)
    dt = x_tilde - x0
    t_j = phi_at_x_tilde + float(dt @ dt) / (2.0 * lam) - m_j
    r = x_tilde - x_j
    residual_sq = float(r @ r)
    eta = t_j - residual_sq / (2.0 * lam)
    return HpeTriple(
        w_tilde=x_tilde,
        u=(x0 - x_j) / lam,
        eta=max(eta, 0.0),
        residual_sq=residual_sq,
        criterion_rhs=2.0 * lam * delta,
    )


def default_bundle_lambda(M: float, d0_estimate: float, eps_bar: float) -> float:
    """Return ``max(eps_bar/M^2, min(d0^2/eps_bar, d0/M))``.

    Args:
        M: Lipschitz constant of f.
        d0_estimate: Distance-to-optimum estimate.
        eps_bar: Target accuracy.

    Returns:
        A stepsize inside the admissible range.
    """
    validate_positive(M, "M")
    validate_positive(d0_estimate, "d0_estimate")
    validate_positive(eps_bar, "eps_bar")
    return max(eps_bar / (M * M), min(d0_estimate**2 / eps_bar, d0_estimate / M))


def oracle_budget(M: float, d0: float, eps_bar: float, constant: float) -> int:
    """Return ``ceil(constant * M^2 d0^2 / eps_bar^2)``, at least 1."""
    return max(1, math.ceil(constant * M * M * d0 * d0 / (eps_bar * eps_bar)))


def mpb_outer_step(
    problem: CompositeProblem,
    w: np.ndarray,
    lam: float,
    delta: float,
    k: int,
    config: BundleConfig | None = None,
    first_cut: Cut | None = None,
    trace: MpbTrace | None = None,
) -> tuple[InnerResult, HpeTriple]:
    """Run one HPE step: a fresh bundle loop at w followed by its certificate.

    Args:
        problem: Nonsmooth composite problem.
        w: Current outer iterate w_{k-1}.
        lam: Stepsize.
        delta: Gap tolerance.
        k: Index of the step, for the recorder.
        config: Knobs.
        first_cut: Cut at w if already evaluated.
        trace: Optional recorder.

    Returns:
        Tuple (inner result, triple). The next iterate is ``w - lam * u = x_j``.
    """
    record = None
    if trace is not None:
        record = InnerRecord(k=k, x0=np.array(w, dtype=float), lam=lam, delta=delta)
    inner = mpb_inner(problem, w, lam, delta, config, first_cut, record)
    triple = mpb_certificate(
        w,
        inner.x_j,
        inner.x_tilde,
        inner.m_j,
        lam,
        problem,
        delta,
        phi_at_x_tilde=inner.phi_at_x_tilde,
    )
    if record is not None:
        record.triple = triple
        trace.inner.append(record)
    return inner, triple


def hpe_solve(
    problem: CompositeProblem,
    w0: np.ndarray,
    lam: float,
    delta: float | None,
    eps_bar: float,
    config: BundleConfig | None = None,
    phi_ref: float | None = None,
    d0_estimate: float | None = None,
    trace: MpbTrace | None = None,
) -> RunTrace:
    """Run the HPE framework with MPB inner solves.

    Each outer step resets the bundle, runs ``mpb_inner`` at ``w_{k-1}`` and
    moves to ``w_k = w_{k-1} - lam * u_k = x_j``. The reported value is the
    best phi seen at any evaluated point. With ``phi_ref`` the run stops once
    that gap is at most eps_bar; otherwise it stops when
    ``d0^2 / (2 lam k) + delta <= eps_bar``.

    Args:
        problem: Nonsmooth composite problem.
        w0: Starting point in dom h.
        lam: Stepsize.
        delta: Inner gap tolerance; None means eps_bar / 2.
        eps_bar: Target accuracy.
        config: Knobs.
        phi_ref: Reference optimal value, if known.
        d0_estimate: Distance estimate for the budget and the bound column.
        trace: Optional recorder.

    Returns:
        RunTrace with one row per outer step.

    Raises:
        ValidationError: On bad arguments, or when neither phi_ref nor
            d0_estimate is given.
        BudgetExhaustedError: If the oracle budget, max_outer or an inner loop
            runs out; ``partial`` holds the RunTrace so far.
    """
    if problem.nonsmooth_part is None:
        raise ValidationError("MPB needs a nonsmooth problem")
    config = config or BundleConfig()
    validate_positive(lam, "lam")
    validate_positive(eps_bar, "eps_bar")
    delta = eps_bar / 2.0 if delta is None else delta
    validate_positive(delta, "delta")
    validate_dimension(w0, problem.dimension, "w0")
    if phi_ref is None and d0_estimate is None:
        raise ValidationError("hpe_solve needs phi_ref or d0_estimate to stop")
    if phi_ref is None and delta >= eps_bar:
        raise ValidationError("delta must be below eps_bar without a reference value")

    M = problem.nonsmooth_part.lipschitz_M
    if lam < eps_bar / (M * M):
        logger.warning(f"lam={lam:.4g} is below eps_bar/M^2={eps_bar / (M * M):.4g}")
    if d0_estimate and lam > d0_estimate**2 / eps_bar:
        logger.warning(
            f"lam={lam:.4g} is above d0^2/eps_bar={d0_estimate**2 / eps_bar:.4g}"
        )

    budget = config.max_oracle_calls
    if budget is None and d0_estimate is not None:
        budget = oracle_budget(M, d0_estimate, eps_bar, config.budget_constant)
    k_target = None
    if phi_ref is None:
        k_target = max(1, math.ceil(d0_estimate**2 / (2.0 * lam * (eps_bar - delta))))

    run = RunTrace(
        method="mpb",
        config={
            "lambda": lam,
            "delta": delta,
            "eps_bar": eps_bar,
            "dual_tol": config.dual_tol if config.dual_tol is not None else delta / 10,
            "max_cuts": config.max_cuts,
            "budget_constant": config.budget_constant,
            "oracle_budget": budget,
            "d0": d0_estimate,
            "k_target": k_target,
        },
    )
    logger.info(
        f"MPB on {problem.name}: lam={lam:.4g} delta={delta:.3g} M={M:.4g} "
        f"budget={budget}"
    )

    start = time.perf_counter()
    state = MpbState(k=0, w=np.array(w0, dtype=float), lam=lam, delta=delta)
    first_cut = _cut_at(problem, state.w)
    calls = 1
    best_phi = first_cut.value + problem.h.value_at(state.w)
    best_x = state.w
    while True:
        if state.k >= config.max_outer or (budget is not None and calls >= budget):
            run.status = RunStatus.BUDGET
            run.message = f"budget reached after k={state.k} outer steps and {calls} calls"
            logger.error(f"MPB: {run.message}")
            raise BudgetExhaustedError(run.message, partial=run)
        try:
            inner, triple = mpb_outer_step(
                problem, state.w, lam, delta, state.k + 1, config, first_cut, trace
            )
        except BudgetExhaustedError as e:
            run.status = RunStatus.FAILED
            run.message = f"inner loop failed at k={state.k + 1}: {e}"
            raise BudgetExhaustedError(run.message, partial=run) from e
        calls += inner.oracle_calls

        for x, phi in ((inner.x_tilde, inner.phi_at_x_tilde), (inner.x_j, inner.phi_at_x_j)):
            if phi < best_phi:
                best_x, best_phi = x, phi
        state.advance(inner)
        first_cut = inner.last_cut
        k = state.k

        bound = None
        if d0_estimate is not None:
            bound = d0_estimate**2 / (2.0 * lam * k) + delta
        run.append(
            TraceRow(
                k=k,
                inner_iters=inner.j,
                oracle_calls=calls,
                phi=best_phi,
                bound=bound,
                seconds=time.perf_counter() - start,
            )
        )
        run.x_final, run.phi_final = best_x, best_phi
        logger.debug(
            f"MPB k={k} j={inner.j} t={inner.t_j:.3e} eta={triple.eta:.3e} "
            f"best={best_phi:.12g}"
        )

        if phi_ref is not None and best_phi - phi_ref <= eps_bar:
            run.message = f"gap <= {eps_bar:g} at k={k}"
            break
        if k_target is not None and k >= k_target:
            run.message = f"a-priori count k={k_target} reached"
            break

    run.status = RunStatus.CONVERGED
    logger.info(f"MPB done: k={state.k} calls={calls} best={best_phi:.12g}")
    return run


def format_bundle(bundle: Bundle) -> str:
    """Render a bundle, one line per cut: anchor entries, value, slope entries.

    Args:
        bundle: Bundle to render.

    Returns:
        Text with 17 significant digits per number.
    """
    lines = []
    for cut in bundle.cuts:
        numbers = [*cut.anchor, cut.value, *cut.slope]
        lines.append(" ".join(f"{v:.17g}" for v in numbers))
    return "\n".join(lines) + ("\n" if lines else "")


def dump_bundle(bundle: Bundle, path: Path) -> Path:
    """Write ``format_bundle(bundle)`` to path atomically.

    Args:
        bundle: Bundle to write.
        path: Destination.

    Returns:
        The path written.
    """
    path = Path(path)
    atomic_write_text(path, format_bundle(bundle))
    logger.debug(f"Wrote {len(bundle)} cuts to {path}")
    return path
