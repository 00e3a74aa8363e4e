"""Accelerated composite gradient (ACG) with a quadratic minorant and certificates.

ACG minimizes ``psi = g + h`` where g is mu-strongly convex and (L + mu)-smooth.
Besides the iterates it maintains the aggregated minorant Gamma_j, which is an
exact mu-curvature quadratic, so the whole recursion stays O(n) per step.
From (x_j, y_j, Gamma_j) it builds an epsilon-subgradient certificate that the
restart outer loop uses as its acceptance test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hpe_bench.core.exceptions import (
    BudgetExhaustedError,
    ModelDomainError,
    ValidationError,
)
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import (
    CompositeProblem,
    ProxFriendlyTerm,
    ShiftedSmooth,
    SmoothOracle,
)
from hpe_bench.core.types import HpeTriple
from hpe_bench.core.validation import validate_count, validate_open_unit

logger = get_logger("acg")

# Oracle evaluations of g per ACG step: value+gradient at x_tilde, value at y_tilde.
CALLS_PER_STEP = 2


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Quadratic ``q(u) = constant + <linear, u - origin> + mu/2 ||u - origin||^2``.

    With the default origin (zero) this is ``constant + <linear, u> + mu/2 ||u||^2``.

    Attributes:
        constant: Value at the origin.
        linear: Gradient at the origin.
        curvature_mu: Hessian is ``curvature_mu * I``.
        origin: Expansion point, or None for the zero vector.
    """

    constant: float
    linear: np.ndarray
    curvature_mu: float
    origin: np.ndarray | None = None

    @classmethod
    def zero(cls, dimension: int, origin: np.ndarray | None = None) -> "QuadraticModel":
        """Return the identically-zero model.

        Args:
            dimension: Number of variables.
            origin: Expansion point.

        Returns:
            Model with all fields zero.
        """
        return cls(0.0, np.zeros(dimension), 0.0, origin)

    def _shift(self, u: np.ndarray) -> np.ndarray:
        return u if self.origin is None else u - self.origin

    def value_at(self, u: np.ndarray) -> float:
        """Evaluate q(u)."""
        d = self._shift(u)
        return self.constant + float(self.linear @ d) + 0.5 * self.curvature_mu * float(d @ d)

    def gradient_at(self, u: np.ndarray) -> np.ndarray:
        """Evaluate the gradient of q at u."""
        return self.linear + self.curvature_mu * self._shift(u)

    def combine(
        self, weight: float, other: "QuadraticModel", other_weight: float
    ) -> "QuadraticModel":
        """Return the convex combination ``(weight*self + other_weight*other) / total``.

        Args:
            weight: Weight of this model.
            other: Model with the same origin.
            other_weight: Weight of ``other``.

        Returns:
            Combined model.
        """
        total = weight + other_weight
        return QuadraticModel(
            constant=(weight * self.constant + other_weight * other.constant) / total,
            linear=(weight * self.linear + other_weight * other.linear) / total,
            curvature_mu=(weight * self.curvature_mu + other_weight * other.curvature_mu)
            / total,
            origin=self.origin,
        )


@dataclass(frozen=True, eq=False)
class AcgParams:
    """Parameters of one ACG run.

    Attributes:
        L: g is (L + mu)-smooth.
        mu: g is mu-strongly convex.
        prox_center_x0: Initial point x_0 (the prox center inside restart ACG).
        lam: Outer stepsize used by the certificate (``inf`` when unused).
        sigma: Relative criterion constant in (0, 1).
        max_inner: Iteration cap for ``acg_solve_subproblem``.
        abs_residual_tol: Absolute guard; None means ``1e-24 * (1 + ||x_0||^2)``.
    """

    L: float
    mu: float
    prox_center_x0: np.ndarray
    lam: float = math.inf
    sigma: float = 0.9
    max_inner: int = 10_000
    abs_residual_tol: float | None = None

    def __post_init__(self) -> None:
        """Validate the constants."""
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValidationError(f"L must be finite and > 0, got {self.L}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValidationError(f"mu must be finite and >= 0, got {self.mu}")
        if not self.lam > 0:
            raise ValidationError(f"lam must be > 0, got {self.lam}")
        validate_open_unit(self.sigma, "sigma")
        validate_count(self.max_inner, "max_inner")
        object.__setattr__(
            self, "prox_center_x0", np.array(self.prox_center_x0, dtype=float)
        )

    @property
    def guard(self) -> float:
        """Return the absolute residual guard."""
        if self.abs_residual_tol is not None:
            return self.abs_residual_tol
        x0 = self.prox_center_x0
        return 1e-24 * (1.0 + float(x0 @ x0))


@dataclass(frozen=True, eq=False)
class AcgState:
    """Per-iteration quantities of ACG.

    Attributes:
        j: Iteration counter.
        A: A_j.
        tau: tau_j.
        x: x_j, the argmin of A_j Gamma_j + ||. - x_0||^2 / 2.
        y: y_j, the best point found.
        Gamma: Aggregated minorant Gamma_j.
        psi_at_y: Cached psi(y_j); +inf before the first step.
        oracle_calls: g evaluations so far.
    """

    j: int
    A: float
    tau: float
    x: np.ndarray
    y: np.ndarray
    Gamma: QuadraticModel
    psi_at_y: float
    oracle_calls: int


@dataclass(frozen=True, eq=False)
class Certificate:
    """Epsilon-subgradient certificate built from an ACG state.

    Attributes:
        v: (x_0 - x_j) / A_j.
        v_hat: v_j + (x_0 - x_j) / lam, an eps_j-subgradient of phi at y_j.
        eps: eps_j.
        residual_sq: ||lam * v_hat + y_j - x_0||^2.
        rhs_sq: sigma * ||x_0 - y_j||^2.
    """

    v: np.ndarray
    v_hat: np.ndarray
    eps: float
    residual_sq: float
    rhs_sq: float


@dataclass(frozen=True, eq=False)
class AcgStepRecord:
    """Everything one ACG step computed, for the invariant suites."""

    j: int
    A: float
    a: float
    A_next: float
    tau: float
    tau_next: float
    x_prev: np.ndarray
    x_tilde: np.ndarray
    g_value: float
    g_grad: np.ndarray
    y_tilde: np.ndarray
    psi_y_tilde: float
    gamma_tilde_at_y_tilde: float
    gamma: QuadraticModel
    Gamma_next: QuadraticModel
    x_next: np.ndarray
    y_prev: np.ndarray
    y_next: np.ndarray
    psi_prev: float
    psi_next: float


@dataclass
class AcgTrace:
    """Instrumentation recorder for one ACG run.

    Attributes:
        g_oracle: The smooth part g the run used.
        h: The prox-friendly part.
        params: Run parameters.
        steps: One record per step.
        certificates: Certificates in the order they were built.
    """

    g_oracle: SmoothOracle
    h: ProxFriendlyTerm
    params: AcgParams
    steps: list[AcgStepRecord] = field(default_factory=list)
    certificates: list[Certificate] = field(default_factory=list)

    def psi(self, u: np.ndarray) -> float:
        """Evaluate psi = g + h."""
        hu = self.h.value_at(u)
        if hu == math.inf:
            return math.inf
        return self.g_oracle.value_at(u) + hu

    def gamma_tilde(self, record: AcgStepRecord, u: np.ndarray) -> float:
        """Evaluate the linearized minorant of a step at u."""
        hu = self.h.value_at(u)
        if hu == math.inf:
            return math.inf
        d = u - record.x_tilde
        return (
            record.g_value
            + float(record.g_grad @ d)
            + hu
            + 0.5 * self.params.mu * float(d @ d)
        )


@dataclass(frozen=True, eq=False)
class SubproblemResult:
    """Outcome of ``acg_solve_subproblem``.

    Attributes:
        triple: Accepted (w_tilde, u, eta) with residual diagnostics.
        certificate: Certificate the triple was read from.
        inner_iters: ACG steps taken.
        oracle_calls: g evaluations made.
        via_guard: True when the absolute guard, not the relative test, fired.
        phi_at_w_tilde: phi at the accepted point, read off the cached psi.
    """

    triple: HpeTriple
    certificate: Certificate
    inner_iters: int
    oracle_calls: int
    via_guard: bool = False
    phi_at_w_tilde: float = math.nan

    @property
    def w_tilde(self) -> np.ndarray:
        """Return the accepted point."""
        return self.triple.w_tilde

    @property
    def u(self) -> np.ndarray:
        """Return the accepted subgradient."""
        return self.triple.u

    @property
    def eta(self) -> float:
        """Return the accepted error."""
        return self.triple.eta


def acg_init(params: AcgParams) -> AcgState:
    """Return the initial ACG state: A_0 = 0, tau_0 = 1/L, y_0 = x_0.

    Gamma_0 is ``mu/2 ||u - x_0||^2`` so every Gamma_j has curvature mu. It
    carries weight A_0 = 0 in the first combination, so Gamma_1 = gamma_0.

    Args:
        params: Run parameters.

    Returns:
        State at j = 0 (no oracle calls made).
    """
    x0 = params.prox_center_x0
    return AcgState(
        j=0,
        A=0.0,
        tau=1.0 / params.L,
        x=x0.copy(),
        y=x0.copy(),
        Gamma=QuadraticModel(0.0, np.zeros(x0.shape[0]), params.mu, origin=x0),
        psi_at_y=math.inf,
        oracle_calls=0,
    )


def acg_coefficients(
    state: AcgState, params: AcgParams
) -> tuple[float, float, float, np.ndarray]:
    """Compute a_j, A_{j+1}, tau_{j+1} and the extrapolated point x_tilde_j.

    Args:
        state: Current state.
        params: Run parameters.

    Returns:
        Tuple (a_j, A_next, tau_next, x_tilde).
    """
    tau, A = state.tau, state.A
    a = (tau + math.sqrt(tau * tau + 4.0 * tau * A)) / 2.0
    A_next = A + a
    tau_next = tau + params.mu * a / params.L
    x_tilde = (A * state.y + a * state.x) / A_next
    return a, A_next, tau_next, x_tilde


def acg_step(
    state: AcgState,
    params: AcgParams,
    g_oracle: SmoothOracle,
    h: ProxFriendlyTerm,
    trace: AcgTrace | None = None,
) -> AcgState:
    """Run one ACG iteration.

    Args:
        state: Current state.
        params: Run parameters.
        g_oracle: Smooth part g (value and gradient).
        h: Prox-friendly part.
        trace: Optional recorder receiving an AcgStepRecord.

    Returns:
        Next state.
    """
    L, mu = params.L, params.mu
    x0 = params.prox_center_x0
    a, A_next, tau_next, x_tilde = acg_coefficients(state, params)

    g_value = g_oracle.value_at(x_tilde)
    g_grad = g_oracle.gradient_at(x_tilde)
    step = 1.0 / (L + mu)
    y_tilde = h.prox_at(x_tilde - step * g_grad, step)
    h_y_tilde = h.value_at(y_tilde)
    psi_y_tilde = g_oracle.value_at(y_tilde) + h_y_tilde

    if psi_y_tilde <= state.psi_at_y:
        y_next, psi_next = y_tilde, psi_y_tilde
    else:
        y_next, psi_next = state.y, state.psi_at_y

    x_next = ((L + mu) * a * y_tilde - (state.A * a * L / A_next) * state.y) / (
        A_next * mu + 1.0
    )

    d = y_tilde - x_tilde
    gamma_tilde_at_y_tilde = (
        g_value + float(g_grad @ d) + h_y_tilde + 0.5 * mu * float(d @ d)
    )
    # gamma_j expanded around x_0: gamma_j(y_tilde) = gamma_tilde_j(y_tilde),
    # slope L (x_tilde - y_tilde) at y_tilde, curvature mu.
    e = y_tilde - x0
    slope = L * (x_tilde - y_tilde)
    gamma = QuadraticModel(
        constant=gamma_tilde_at_y_tilde - float(slope @ e) + 0.5 * mu * float(e @ e),
        linear=slope - mu * e,
        curvature_mu=mu,
        origin=x0,
    )
    Gamma_next = state.Gamma.combine(state.A, gamma, a)

    new_state = AcgState(
        j=state.j + 1,
        A=A_next,
        tau=tau_next,
        x=x_next,
        y=y_next,
        Gamma=Gamma_next,
        psi_at_y=psi_next,
        oracle_calls=state.oracle_calls + CALLS_PER_STEP,
    )

    if trace is not None:
        trace.steps.append(
            AcgStepRecord(
                j=state.j,
                A=state.A,
                a=a,
                A_next=A_next,
                tau=state.tau,
                tau_next=tau_next,
                x_prev=state.x,
                x_tilde=x_tilde,
                g_value=g_value,
                g_grad=g_grad,
                y_tilde=y_tilde,
                psi_y_tilde=psi_y_tilde,
                gamma_tilde_at_y_tilde=gamma_tilde_at_y_tilde,
                gamma=gamma,
                Gamma_next=Gamma_next,
                x_next=x_next,
                y_prev=state.y,
                y_next=y_next,
                psi_prev=state.psi_at_y,
                psi_next=psi_next,
            )
        )
    return new_state


def gamma_argmin_regularized(
    Gamma: QuadraticModel, A: float, x0: np.ndarray
) -> np.ndarray:
    """Return argmin_u A * Gamma(u) + ||u - x0||^2 / 2 in closed form.

    Args:
        Gamma: Quadratic model.
        A: Nonnegative weight.
        x0: Regularization center.

    Returns:
        The minimizer; x0 itself when A = 0.
    """
    if A < 0:
        raise ValidationError(f"A must be >= 0, got {A}")
    x0 = np.asarray(x0, dtype=float)
    if A == 0:
        return x0.copy()
    mu = Gamma.curvature_mu
    rhs = x0 - A * Gamma.linear
    if Gamma.origin is not None:
        rhs = rhs + A * mu * Gamma.origin
    return rhs / (A * mu + 1.0)


def regularized_model_min(Gamma: QuadraticModel, A: float, x0: np.ndarray) -> float:
    """Return min_u A * Gamma(u) + ||u - x0||^2 / 2.

    Args:
        Gamma: Quadratic model.
        A: Nonnegative weight.
        x0: Regularization center.

    Returns:
        Optimal value.
    """
    u = gamma_argmin_regularized(Gamma, A, x0)
    d = u - x0
    return A * Gamma.value_at(u) + 0.5 * float(d @ d)


def gamma_argmin(Gamma: QuadraticModel) -> np.ndarray:
    """Return argmin_u Gamma(u).

    Args:
        Gamma: Quadratic model with positive curvature.

    Returns:
        The minimizer.

    Raises:
        ModelDomainError: If the model is flat (unbounded below or constant).
    """
    if Gamma.curvature_mu <= 0:
        raise ModelDomainError("argmin of a quadratic model with zero curvature")
    u = -Gamma.linear / Gamma.curvature_mu
    return u if Gamma.origin is None else u + Gamma.origin


def compute_certificate(
    state: AcgState, params: AcgParams, phi_value_at_y: float
) -> Certificate:
    """Build (v_j, v_hat_j, eps_j) and the acceptance residuals from a state.

    Args:
        state: State with A_j > 0.
        params: Run parameters with a finite lam.
        phi_value_at_y: phi(y_j).

    Returns:
        Certificate.

    Raises:
        ModelDomainError: If A_j = 0.
        ValidationError: If lam is not finite.
    """
    if state.A <= 0:
        raise ModelDomainError("certificate needs A_j > 0")
    lam = params.lam
    if not math.isfinite(lam):
        raise ValidationError("certificate needs a finite lam")

    x0 = params.prox_center_x0
    dx = x0 - state.x
    v = dx / state.A
    v_hat = v + dx / lam
    phi_j_at_x = state.Gamma.value_at(state.x) - float(dx @ dx) / (2.0 * lam)
    eps = phi_value_at_y - phi_j_at_x - float(v_hat @ (state.y - state.x))

    r = lam * v_hat + state.y - x0
    dy = x0 - state.y
    return Certificate(
        v=v,
        v_hat=v_hat,
        eps=eps,
        residual_sq=float(r @ r),
        rhs_sq=params.sigma * float(dy @ dy),
    )


def acg_solve_subproblem(
    problem: CompositeProblem,
    z_tilde: np.ndarray,
    params: AcgParams,
    trace: AcgTrace | None = None,
) -> SubproblemResult:
    """Run ACG on min phi + ||. - z_tilde||^2 / (2 lam) until the criterion holds.

    ACG runs with g = f + ||. - z_tilde||^2 / (2 lam), constants (L_f, mu = 1/lam).
    Every step builds a certificate and stops as soon as
    ``residual_sq + 2 lam eps <= sigma ||z_tilde - y_j||^2`` or the absolute
    guard fires.

    Args:
        problem: Smooth composite problem.
        z_tilde: Prox center.
        params: Run parameters; ``prox_center_x0`` must equal z_tilde and
            ``mu`` must equal 1/lam.
        trace: Optional recorder.

    Returns:
        SubproblemResult with the accepted triple (y_j, v_hat_j, eps_j).

    Raises:
        ValidationError: If the problem is not smooth or params do not match.
        BudgetExhaustedError: If max_inner steps do not satisfy the criterion;
            ``partial`` holds the best SubproblemResult seen.
    """
    if problem.smooth_part is None:
        raise ValidationError("acg_solve_subproblem needs a smooth problem")
    z_tilde = np.asarray(z_tilde, dtype=float)
    if not np.array_equal(params.prox_center_x0, z_tilde):
        raise ValidationError("params.prox_center_x0 must equal z_tilde")
    lam = params.lam
    if not math.isclose(params.mu, 1.0 / lam, rel_tol=1e-12):
        raise ValidationError(f"params.mu must be 1/lam, got {params.mu} vs {1.0 / lam}")

    g = ShiftedSmooth(problem.smooth_part, z_tilde, lam)
    if trace is not None:
        trace.g_oracle, trace.h = g, problem.h
    guard = params.guard

    state = acg_init(params)
    best: SubproblemResult | None = None
    best_excess = math.inf
    for _ in range(params.max_inner):
        state = acg_step(state, params, g, problem.h, trace)
        dy = state.y - z_tilde
        phi_y = state.psi_at_y - float(dy @ dy) / (2.0 * lam)
        cert = compute_certificate(state, params, phi_y)
        if trace is not None:
            trace.certificates.append(cert)

        eta = max(cert.eps, 0.0)
        lhs = cert.residual_sq + 2.0 * lam * eta
        relative_ok = lhs <= cert.rhs_sq
        guard_ok = lhs <= guard
        result = SubproblemResult(
            triple=HpeTriple(
                w_tilde=state.y,
                u=cert.v_hat,
                eta=eta,
                residual_sq=cert.residual_sq,
                criterion_rhs=max(cert.rhs_sq, guard),
            ),
            certificate=cert,
            inner_iters=state.j,
            oracle_calls=state.oracle_calls,
            via_guard=guard_ok and not relative_ok,
            phi_at_w_tilde=phi_y,
        )
        if relative_ok or guard_ok:
            logger.debug(
                f"ACG accepted at j={state.j} A={state.A:.4g} lhs={lhs:.3e} "
                f"rhs={cert.rhs_sq:.3e} guard={guard_ok and not relative_ok}"
            )
            return result
        if lhs - cert.rhs_sq < best_excess:
            best, best_excess = result, lhs - cert.rhs_sq

    logger.error(f"ACG hit max_inner={params.max_inner} without meeting the criterion")
    raise BudgetExhaustedError(
        f"ACG exceeded max_inner={params.max_inner}", partial=best
    )


def subproblem_params(
    L: float,
    lam: float,
    z_tilde: np.ndarray,
    sigma: float = 0.9,
    max_inner: int = 10_000,
    abs_residual_tol: float | None = None,
) -> AcgParams:
    """Return AcgParams for the proximal subproblem centred at z_tilde.

    Args:
        L: Smoothness constant of f.
        lam: Outer stepsize.
        z_tilde: Prox center.
        sigma: Relative criterion constant.
        max_inner: Iteration cap.
        abs_residual_tol: Absolute guard override.

    Returns:
        Parameters with mu = 1/lam.
    """
    return AcgParams(
        L=L,
        mu=1.0 / lam,
        prox_center_x0=z_tilde,
        lam=lam,
        sigma=sigma,
        max_inner=max_inner,
        abs_residual_tol=abs_residual_tol,
    )
