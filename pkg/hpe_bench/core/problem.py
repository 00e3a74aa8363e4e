"""Problem oracles for composite convex minimization of phi = f + h.

The smooth part exposes value and gradient, the Lipschitz part value and a
subgradient, and the prox-friendly part value and proximal mapping. These are
exactly the calls the solvers make, so oracle accounting happens in the solvers.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np

from hpe_bench.core.exceptions import ValidationError
from hpe_bench.core.logger import get_logger
from hpe_bench.core.validation import validate_dimension, validate_positive

logger = get_logger("problem")

# Floor for generated smoothness constants so that f == 0 stays a valid oracle.
_MIN_CURVATURE = 1e-12
# Relative slack accepted by set indicators for points on the boundary.
_FEASIBILITY_TOL = 1e-12


@runtime_checkable
class SmoothOracle(Protocol):
    """Convex L-smooth function."""

    lipschitz_L: float
    strong_convexity_mu_f: float

    def value_at(self, x: np.ndarray) -> float:
        """Return f(x)."""
        ...

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        """Return the gradient of f at x."""
        ...


@runtime_checkable
class NonsmoothOracle(Protocol):
    """Convex M-Lipschitz function."""

    lipschitz_M: float

    def value_at(self, x: np.ndarray) -> float:
        """Return f(x)."""
        ...

    def subgradient_at(self, x: np.ndarray) -> np.ndarray:
        """Return one subgradient of f at x."""
        ...


@runtime_checkable
class ProxFriendlyTerm(Protocol):
    """Convex term with an exact proximal mapping."""

    def value_at(self, x: np.ndarray) -> float:
        """Return h(x), possibly +inf."""
        ...

    def prox_at(self, center: np.ndarray, weight: float) -> np.ndarray:
        """Return argmin_u h(u) + ||u - center||^2 / (2 * weight)."""
        ...


def power_iteration(
    matrix: np.ndarray, rel_tol: float = 1e-10, max_iter: int = 100_000
) -> float:
    """Estimate the largest eigenvalue of a symmetric PSD matrix.

    Args:
        matrix: Symmetric positive semidefinite matrix.
        rel_tol: Stop when the Rayleigh quotient changes by less than this, relatively.
        max_iter: Iteration cap.

    Returns:
        Largest eigenvalue estimate (0.0 for the zero matrix).
    """
    n = matrix.shape[0]
    v = np.ones(n) / np.sqrt(n)
    estimate = float(v @ matrix @ v)
    for _ in range(max_iter):
        w = matrix @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_estimate = float(v @ matrix @ v)
        if abs(new_estimate - estimate) <= rel_tol * abs(new_estimate):
            return new_estimate
        estimate = new_estimate
    logger.warning(f"power iteration hit max_iter={max_iter} at rel_tol={rel_tol}")
    return estimate


@dataclass(frozen=True, eq=False)
class LeastSquares:
    """Least-squares loss ``f(x) = 0.5 * ||A x - b||^2``.

    Attributes:
        A: Design matrix with shape (m, n).
        b: Observation vector with shape (m,).
        lipschitz_L: Largest eigenvalue of A^T A (power iteration).
        strong_convexity_mu_f: Smallest eigenvalue of A^T A, clipped at 0.
    """

    A: np.ndarray
    b: np.ndarray
    lipschitz_L: float = field(init=False)
    strong_convexity_mu_f: float = field(init=False)

    def __post_init__(self) -> None:
        """Compute the curvature constants of A^T A."""
        gram = self.A.T @ self.A
        top = power_iteration(gram)
        bottom = float(np.linalg.eigvalsh(gram)[0])
        if bottom <= _MIN_CURVATURE * max(top, 1.0):
            bottom = 0.0
        object.__setattr__(self, "lipschitz_L", max(top, _MIN_CURVATURE))
        object.__setattr__(self, "strong_convexity_mu_f", bottom)

    def value_at(self, x: np.ndarray) -> float:
        """Return 0.5 * ||A x - b||^2."""
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        """Return A^T (A x - b)."""
        return self.A.T @ (self.A @ x - self.b)


@dataclass(frozen=True, eq=False)
class ShiftedSmooth:
    """Smooth function plus a proximal term, ``f + ||. - center||^2 / (2 lam)``.

    Attributes:
        base: Underlying smooth oracle.
        center: Prox center.
        lam: Proximal stepsize.
    """

    base: SmoothOracle
    center: np.ndarray
    lam: float

    @property
    def lipschitz_L(self) -> float:
        """Return L_f + 1/lam."""
        return self.base.lipschitz_L + 1.0 / self.lam

    @property
    def strong_convexity_mu_f(self) -> float:
        """Return mu_f + 1/lam."""
        return self.base.strong_convexity_mu_f + 1.0 / self.lam

    def value_at(self, x: np.ndarray) -> float:
        """Return f(x) + ||x - center||^2 / (2 lam)."""
        d = x - self.center
        return self.base.value_at(x) + float(d @ d) / (2.0 * self.lam)

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        """Return grad f(x) + (x - center) / lam."""
        return self.base.gradient_at(x) + (x - self.center) / self.lam


@dataclass(frozen=True, eq=False)
class MaxAffine:
    """Piecewise-linear function ``f(x) = max_i <g_i, x> + c_i``.

    Attributes:
        G: Slopes, one row per piece.
        c: Offsets.
        lipschitz_M: Largest slope norm.
    """

    G: np.ndarray
    c: np.ndarray
    lipschitz_M: float = field(init=False)

    def __post_init__(self) -> None:
        """Compute the Lipschitz constant."""
        norms = np.linalg.norm(self.G, axis=1)
        object.__setattr__(self, "lipschitz_M", max(float(norms.max()), _MIN_CURVATURE))

    def value_at(self, x: np.ndarray) -> float:
        """Return the largest affine piece at x."""
        return float(np.max(self.G @ x + self.c))

    def subgradient_at(self, x: np.ndarray) -> np.ndarray:
        """Return the slope of the lowest-index maximizing piece."""
        # np.argmax resolves exact ties to the first index.
        return self.G[int(np.argmax(self.G @ x + self.c))].copy()


@dataclass(frozen=True)
class ZeroTerm:
    """The zero function; its prox is the identity."""

    def value_at(self, x: np.ndarray) -> float:
        """Return 0."""
        return 0.0

    def prox_at(self, center: np.ndarray, weight: float) -> np.ndarray:
        """Return a copy of center."""
        return np.array(center, dtype=float, copy=True)


@dataclass(frozen=True)
class L1Norm:
    """Scaled l1 norm ``weight * ||x||_1``.

    Attributes:
        weight: Regularization weight, nonnegative.
    """

    weight: float = 1.0

    def value_at(self, x: np.ndarray) -> float:
        """Return weight * ||x||_1."""
        return self.weight * float(np.abs(x).sum())

    def prox_at(self, center: np.ndarray, weight: float) -> np.ndarray:
        """Soft-threshold center at level ``weight * self.weight``."""
        level = weight * self.weight
        return np.sign(center) * np.maximum(np.abs(center) - level, 0.0)


@dataclass(frozen=True)
class BallIndicator:
    """Indicator of the Euclidean ball of a given radius around the origin.

    Attributes:
        radius: Ball radius, positive.
    """

    radius: float = 1.0

    def value_at(self, x: np.ndarray) -> float:
        """Return 0 inside the ball and +inf outside."""
        inside = np.linalg.norm(x) <= self.radius * (1.0 + _FEASIBILITY_TOL)
        return 0.0 if inside else float("inf")

    def prox_at(self, center: np.ndarray, weight: float) -> np.ndarray:
        """Project center radially onto the ball."""
        norm = float(np.linalg.norm(center))
        if norm <= self.radius:
            return np.array(center, dtype=float, copy=True)
        return center * (self.radius / norm)


@dataclass(frozen=True, eq=False)
class BoxIndicator:
    """Indicator of the box ``lower <= x <= upper`` (componentwise).

    A degenerate box with ``lower == upper`` pins the point.

    Attributes:
        lower: Lower bounds (scalar or array).
        upper: Upper bounds (scalar or array).
    """

    lower: Any = 0.0
    upper: Any = 1.0

    def value_at(self, x: np.ndarray) -> float:
        """Return 0 inside the box and +inf outside."""
        slack = _FEASIBILITY_TOL * (1.0 + np.abs(x))
        ok = np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack)
        return 0.0 if ok else float("inf")

    def prox_at(self, center: np.ndarray, weight: float) -> np.ndarray:
        """Clip center to the box."""
        return np.clip(center, self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """Composite problem ``min phi(x) = f(x) + h(x)``.

    Exactly one of ``smooth_part`` / ``nonsmooth_part`` is set. Instances are
    immutable and safe to share between concurrent runs.

    Attributes:
        h: Prox-friendly term.
        dimension: Number of variables.
        smooth_part: Smooth f, for the accelerated methods.
        nonsmooth_part: Lipschitz f, for the bundle and subgradient methods.
        known_optimum: phi_* when known in closed form.
        known_minimizer: A minimizer when known in closed form.
        name: Short identifier used in logs and reports.
    """

    h: ProxFriendlyTerm
    dimension: int
    smooth_part: SmoothOracle | None = None
    nonsmooth_part: NonsmoothOracle | None = None
    known_optimum: float | None = None
    known_minimizer: np.ndarray | None = None
    name: str = "problem"

    def __post_init__(self) -> None:
        """Check that exactly one kind of f is present."""
        if (self.smooth_part is None) == (self.nonsmooth_part is None):
            raise ValidationError(
                "exactly one of smooth_part / nonsmooth_part must be given"
            )
        if self.dimension < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.dimension}")

    @property
    def is_smooth(self) -> bool:
        """Return True if f is the smooth kind."""
        return self.smooth_part is not None

    @property
    def f(self) -> SmoothOracle | NonsmoothOracle:
        """Return whichever f oracle is present."""
        return self.smooth_part if self.smooth_part is not None else self.nonsmooth_part

    def f_value_and_slope(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        """Evaluate f and its gradient/subgradient at x (one oracle call).

        Args:
            x: Evaluation point.

        Returns:
            Tuple of (f(x), slope).
        """
        if self.smooth_part is not None:
            return self.smooth_part.value_at(x), self.smooth_part.gradient_at(x)
        return self.nonsmooth_part.value_at(x), self.nonsmooth_part.subgradient_at(x)


def eval_phi(problem: CompositeProblem, x: np.ndarray) -> float:
    """Evaluate phi(x) = f(x) + h(x).

    Args:
        problem: Composite problem.
        x: Point with ``problem.dimension`` entries.

    Returns:
        phi(x); +inf when x lies outside dom h.

    Raises:
        ValidationError: On a dimension mismatch.
    """
    validate_dimension(x, problem.dimension)
    hx = problem.h.value_at(x)
    if hx == float("inf"):
        return float("inf")
    return problem.f.value_at(x) + hx


def prox_h(problem: CompositeProblem, center: np.ndarray, weight: float) -> np.ndarray:
    """Evaluate the proximal mapping of h.

    Args:
        problem: Composite problem.
        center: Prox center.
        weight: Prox weight c > 0.

    Returns:
        argmin_u h(u) + ||u - center||^2 / (2 c).

    Raises:
        ValidationError: If weight is not positive or center has the wrong size.
    """
    validate_positive(weight, "weight")
    validate_dimension(center, problem.dimension, "center")
    return problem.h.prox_at(np.asarray(center, dtype=float), weight)


def proximal_subproblem(
    problem: CompositeProblem, center: np.ndarray, lam: float
) -> CompositeProblem:
    """Build ``min phi(u) + ||u - center||^2 / (2 lam)`` as a composite problem.

    Args:
        problem: Smooth composite problem.
        center: Prox center.
        lam: Proximal stepsize.

    Returns:
        Composite problem whose smooth part is a ShiftedSmooth.

    Raises:
        ValidationError: If the problem is not smooth or lam is not positive.
    """
    validate_positive(lam, "lam")
    if problem.smooth_part is None:
        raise ValidationError("proximal_subproblem needs a smooth problem")
    return CompositeProblem(
        h=problem.h,
        dimension=problem.dimension,
        smooth_part=ShiftedSmooth(problem.smooth_part, np.array(center, copy=True), lam),
        name=f"{problem.name}-prox",
    )


def _feed(hasher: "hashlib._Hash", obj: Any) -> None:
    if obj is None:
        hasher.update(b"none")
    elif isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj, dtype=float)
        hasher.update(str(arr.shape).encode())
        hasher.update(arr.tobytes())
    elif dataclasses.is_dataclass(obj):
        hasher.update(type(obj).__name__.encode())
        for f in dataclasses.fields(obj):
            if f.init:
                _feed(hasher, getattr(obj, f.name))
    else:
        hasher.update(repr(obj).encode())


def fingerprint(problem: CompositeProblem) -> str:
    """Return a SHA-256 digest of the data defining a problem.

    Args:
        problem: Composite problem.

    Returns:
        Hex digest; equal problems built from equal data share it.
    """
    hasher = hashlib.sha256()
    _feed(hasher, problem.f)
    _feed(hasher, problem.h)
    hasher.update(str(problem.dimension).encode())
    return hasher.hexdigest()
