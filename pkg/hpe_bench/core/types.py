"""Data types shared by the solvers and the harness."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

TRACE_COLUMNS = ("k", "inner_iters", "oracle_calls", "phi", "bound", "seconds")


@dataclass(frozen=True)
class HpeTriple:
    """Accepted inner-solver output handed to an outer proximal-point loop.

    The triple certifies ``u in d_eta phi(w_tilde)`` together with the relative
    (accelerated) or absolute error criterion of the outer framework.

    Attributes:
        w_tilde: Approximate solution of the proximal subproblem.
        u: Approximate subgradient of phi at ``w_tilde``.
        eta: Subgradient error, nonnegative.
        residual_sq: Left-hand residual ``||lam*u + w_tilde - center||^2``.
        criterion_rhs: Right-hand side the residual was accepted against.
    """

    w_tilde: np.ndarray
    u: np.ndarray
    eta: float
    residual_sq: float
    criterion_rhs: float

    def criterion_lhs(self, lam: float) -> float:
        """Return ``residual_sq + 2*lam*eta``.

        Args:
            lam: Outer stepsize.

        Returns:
            The left-hand side of the acceptance criterion.
        """
        return self.residual_sq + 2.0 * lam * self.eta


class RunStatus(Enum):
    """Final status of a solver run."""

    CONVERGED = "converged"
    BUDGET = "budget"
    FAILED = "failed"


@dataclass(frozen=True)
class TraceRow:
    """One record of a run trace.

    Attributes:
        k: Outer iteration (or iteration for single-step baselines).
        inner_iters: Inner iterations spent in this outer step.
        oracle_calls: Cumulative f-oracle evaluations.
        phi: Objective value reported for this record.
        bound: Theoretical upper bound on the gap, if any.
        seconds: Wall time since the run started.
    """

    k: int
    inner_iters: int
    oracle_calls: int
    phi: float
    bound: float | None
    seconds: float


@dataclass
class RunTrace:
    """Per-run record emitted by every solver.

    Attributes:
        method: Method name.
        rows: Records ordered by ``k``.
        status: Final status.
        config: Snapshot of the parameters the run used.
        message: Free-form explanation of the final status.
        x_final: Final (or best) point.
        phi_final: Objective value at ``x_final``.
    """

    method: str
    rows: list[TraceRow] = field(default_factory=list)
    status: RunStatus = RunStatus.FAILED
    config: dict[str, Any] = field(default_factory=dict)
    message: str = ""
    x_final: np.ndarray | None = None
    phi_final: float = float("inf")

    def append(self, row: TraceRow) -> None:
        """Append a row, enforcing order and monotone counters.

        Args:
            row: Record to append.

        Raises:
            ValueError: If ``k`` or the cumulative counter decreases.
        """
        if self.rows:
            last = self.rows[-1]
            if row.k < last.k or row.oracle_calls < last.oracle_calls:
                raise ValueError(
                    f"trace rows must be ordered: got k={row.k} after k={last.k}"
                )
        self.rows.append(row)

    @property
    def total_oracle_calls(self) -> int:
        """Return the cumulative oracle count of the last row."""
        return self.rows[-1].oracle_calls if self.rows else 0

    @property
    def total_inner_iters(self) -> int:
        """Return the sum of inner iterations over all rows."""
        return sum(r.inner_iters for r in self.rows)

    def calls_to_reach(self, phi_ref: float, gap: float) -> int | None:
        """Return the first cumulative oracle count with ``phi - phi_ref <= gap``.

        Args:
            phi_ref: Reference optimal value.
            gap: Target gap.

        Returns:
            Oracle count of the first qualifying row, or None if never reached.
        """
        for row in self.rows:
            if row.phi - phi_ref <= gap:
                return row.oracle_calls
        return None
