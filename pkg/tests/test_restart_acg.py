"""Tests for the restart ACG outer loop."""
from __future__ import annotations

import math

import numpy as np
import pytest

from hpe_bench.core.exceptions import BudgetExhaustedError, ValidationError
from hpe_bench.core.invariants import InvariantTracker, check_restart_trace
from hpe_bench.core.problem import BallIndicator, CompositeProblem, LeastSquares
from hpe_bench.core.reference import reference_solve
from hpe_bench.core.restart_acg import (
    RestartConfig,
    RestartTrace,
    default_lambda,
    inner_iteration_bound,
    outer_coefficients,
    outer_iteration_bound,
    outer_step,
    restart_init,
    solve,
    warmup_d0,
    warmup_state,
)
from hpe_bench.core.types import RunStatus, RunTrace


@pytest.fixture
def lasso_reference(small_lasso):
    """Reference solution and d0 from the origin for the small LASSO instance."""
    ref = reference_solve(small_lasso, 1e-10)
    x0 = np.zeros(small_lasso.dimension)
    return ref, float(np.linalg.norm(x0 - ref.x_ref))


class TestOuterCoefficients:
    """Tests for the b_k / B_k recursion."""

    def test_first_step(self):
        """Test B_0 = 0 gives b_1 = B_1 = lam."""
        assert outer_coefficients(0.0, 3.0) == pytest.approx((3.0, 3.0))

    def test_second_step_unit_lambda(self):
        """Test lam = 1, B_1 = 1 gives b_2 = (1 + sqrt 5)/2."""
        b, B = outer_coefficients(1.0, 1.0)
        assert b == pytest.approx((1.0 + math.sqrt(5.0)) / 2.0)
        assert B == pytest.approx((3.0 + math.sqrt(5.0)) / 2.0)

    def test_growth(self):
        """Test B_k >= k^2 lam / 4 along the recursion."""
        B, lam = 0.0, 0.7
        for k in range(1, 200):
            b, B = outer_coefficients(B, lam)
            assert b * b - lam * b - lam * (B - b) == pytest.approx(0.0, abs=1e-9 * b * b)
            assert B >= k * k * lam / 4.0


class TestStepsizeRules:
    """Tests for the default stepsize and the a-priori counts."""

    def test_default_lambda_unit_scales(self):
        """Test all candidates coincide at unit scales."""
        assert default_lambda(1.0, 1.0, 1.0) == pytest.approx(1.0)

    def test_default_lambda_example(self):
        """Test L = 100, d0 = 1, eps_bar = 1e-4 gives lam = 10."""
        assert default_lambda(100.0, 1.0, 1e-4) == pytest.approx(10.0)

    def test_default_lambda_in_range(self, rng):
        """Test the stepsize lies in [1/L, max(1/L, d0^2/eps_bar)]."""
        for _ in range(1000):
            L, d0, eps = 10 ** rng.uniform(-3, 3, size=3)
            lam = default_lambda(L, d0, eps)
            assert lam >= 1.0 / L * (1 - 1e-12)
            assert lam <= max(1.0 / L, d0 * d0 / eps) * (1 + 1e-12)

    def test_inner_bound(self):
        """Test the inner bound at lam L = 10 and its domain."""
        assert inner_iteration_bound(10.0, 1.0) == 15
        with pytest.raises(ValidationError):
            inner_iteration_bound(0.5, 1.0)

    def test_outer_bound(self):
        """Test ceil(sqrt(2) d0 / sqrt(lam eps_bar))."""
        assert outer_iteration_bound(1.0, 1.0, 0.3) == 3


class TestOuterStep:
    """Tests for one outer iteration."""

    def test_init(self, small_lasso):
        """Test B_0 = 0, z_0 = w_0 and one oracle call for phi(w_0)."""
        w0 = np.ones(small_lasso.dimension)
        state = restart_init(small_lasso, w0)
        assert state.k == 0 and state.B == 0.0
        np.testing.assert_array_equal(state.z, w0)
        np.testing.assert_array_equal(state.w, w0)
        assert state.total_oracle_calls == 1

    def test_init_outside_domain(self):
        """Test a start outside dom h is rejected."""
        problem = CompositeProblem(
            h=BallIndicator(1.0), dimension=2, smooth_part=LeastSquares(np.eye(2), np.zeros(2))
        )
        with pytest.raises(ValidationError):
            restart_init(problem, np.array([3.0, 0.0]))

    def test_first_step_center(self, small_lasso):
        """Test k = 1 extrapolates to z_tilde_1 = w_0 with b_1 = lam."""
        L = small_lasso.smooth_part.lipschitz_L
        lam = 5.0 / L
        w0 = np.full(small_lasso.dimension, 0.5)
        trace = RestartTrace()
        state, triple, inner = outer_step(restart_init(small_lasso, w0), small_lasso, lam, trace=trace)

        rec = trace.outer[0]
        assert rec.b == pytest.approx(lam)
        assert rec.B == pytest.approx(lam)
        np.testing.assert_allclose(rec.z_tilde, w0)
        np.testing.assert_allclose(state.z, w0 - lam * triple.u)
        assert state.total_inner_iters == inner
        assert triple.criterion_lhs(lam) <= triple.criterion_rhs

    def test_optimal_start(self, scalar_ls):
        """Test w_0 at the minimizer stops at k = 1 with u = 0."""
        run = solve(scalar_ls, np.array([2.0]), 1.0, 1e-6, phi_ref=0.0)
        assert run.status is RunStatus.CONVERGED
        assert len(run.rows) == 1
        np.testing.assert_allclose(run.x_final, [2.0], atol=1e-12)


class TestSolve:
    """Tests for full restart ACG runs."""

    @pytest.mark.parametrize("scale", [1.0, 10.0])
    def test_outer_rate(self, small_lasso, lasso_reference, scale):
        """Test phi(w_k) - phi_ref <= 2 d0^2 / (lam k^2) at every row."""
        ref, d0 = lasso_reference
        lam = scale / small_lasso.smooth_part.lipschitz_L
        run = solve(small_lasso, np.zeros(small_lasso.dimension), lam, 1e-8, phi_ref=ref.phi_ref, d0_estimate=d0)

        assert run.status is RunStatus.CONVERGED
        assert run.phi_final - ref.phi_ref <= 1e-8
        for row in run.rows:
            assert row.phi - ref.phi_ref <= 2.0 * d0 * d0 / (lam * row.k**2) + 1e-9
            assert row.bound == pytest.approx(2.0 * d0 * d0 / (lam * row.k**2))
        phis = [row.phi for row in run.rows]
        assert all(b <= a for a, b in zip(phis, phis[1:]))

    def test_inner_bound_holds(self, small_lasso, lasso_reference):
        """Test every inner count respects the worst-case bound."""
        ref, d0 = lasso_reference
        L = small_lasso.smooth_part.lipschitz_L
        lam = 10.0 / L
        run = solve(small_lasso, np.zeros(small_lasso.dimension), lam, 1e-8, phi_ref=ref.phi_ref, d0_estimate=d0)
        bound = inner_iteration_bound(lam, L)
        assert all(row.inner_iters <= bound for row in run.rows)

    def test_a_priori_stop(self, small_lasso, lasso_reference):
        """Test the run stops at the a-priori count without a reference value."""
        _, d0 = lasso_reference
        lam = 10.0 / small_lasso.smooth_part.lipschitz_L
        run = solve(small_lasso, np.zeros(small_lasso.dimension), lam, 1e-3, d0_estimate=d0)
        assert run.config["k_target"] == max(1, outer_iteration_bound(d0, lam, 1e-3))
        assert run.rows[-1].k == run.config["k_target"]
        assert run.config["d0_source"] == "given"

    def test_heuristic_d0(self, small_lasso):
        """Test a missing reference and d0 fall back to the warm-up estimate."""
        lam = 10.0 / small_lasso.smooth_part.lipschitz_L
        run = solve(small_lasso, np.zeros(small_lasso.dimension), lam, 1e-2)
        assert run.config["d0_source"] == "heuristic"
        assert run.config["d0"] == pytest.approx(warmup_d0(small_lasso, np.zeros(small_lasso.dimension), lam))

    def test_warmup_work_is_counted(self, small_lasso):
        """Test the warm-up oracle calls and inner iterations appear in the trace totals."""
        lam = 10.0 / small_lasso.smooth_part.lipschitz_L
        x0 = np.zeros(small_lasso.dimension)
        heuristic = solve(small_lasso, x0, lam, 1e-2)
        given = solve(small_lasso, x0, lam, 1e-2, d0_estimate=heuristic.config["d0"])
        warm = warmup_state(small_lasso, x0, lam)
        assert warm.total_oracle_calls > 1
        assert heuristic.config["warmup_oracle_calls"] == warm.total_oracle_calls
        assert heuristic.total_oracle_calls == given.total_oracle_calls + warm.total_oracle_calls
        assert heuristic.total_inner_iters == given.total_inner_iters + warm.total_inner_iters
        assert heuristic.rows[0].oracle_calls > warm.total_oracle_calls
        assert given.config["warmup_oracle_calls"] == 0

    def test_halving_eps_bar(self, small_lasso, lasso_reference):
        """Test halving eps_bar grows the outer count by at most sqrt(2) plus one."""
        ref, d0 = lasso_reference
        lam = 1.0 / small_lasso.smooth_part.lipschitz_L
        x0 = np.zeros(small_lasso.dimension)
        k1 = len(solve(small_lasso, x0, lam, 1e-4, phi_ref=ref.phi_ref, d0_estimate=d0).rows)
        k2 = len(solve(small_lasso, x0, lam, 5e-5, phi_ref=ref.phi_ref, d0_estimate=d0).rows)
        assert k1 <= k2 <= math.sqrt(2.0) * k1 + 1

    def test_budget_exhausted(self, small_lasso, lasso_reference):
        """Test max_outer raises with the partial trace."""
        ref, d0 = lasso_reference
        lam = 1.0 / small_lasso.smooth_part.lipschitz_L
        with pytest.raises(BudgetExhaustedError) as info:
            solve(
                small_lasso,
                np.zeros(small_lasso.dimension),
                lam,
                1e-12,
                RestartConfig(max_outer=2),
                phi_ref=ref.phi_ref,
                d0_estimate=d0,
            )
        partial = info.value.partial
        assert isinstance(partial, RunTrace)
        assert partial.status is RunStatus.BUDGET
        assert len(partial.rows) == 2

    def test_nonsmooth_rejected(self, small_maxaffine):
        """Test restart ACG needs a smooth problem."""
        with pytest.raises(ValidationError):
            solve(small_maxaffine, np.zeros(small_maxaffine.dimension), 1.0, 1e-3, phi_ref=0.0)

    def test_invariant_suite(self, small_lasso, lasso_reference, rng):
        """Test the restart, ACG and relative-prox checks pass on a healthy run."""
        ref, d0 = lasso_reference
        lam = 10.0 / small_lasso.smooth_part.lipschitz_L
        trace = RestartTrace()
        solve(
            small_lasso,
            np.zeros(small_lasso.dimension),
            lam,
            1e-6,
            phi_ref=ref.phi_ref,
            d0_estimate=d0,
            trace=trace,
        )
        tracker = InvariantTracker()
        check_restart_trace(
            trace,
            small_lasso,
            tracker,
            rng,
            phi_ref=ref.phi_ref,
            d0=d0,
            rate_tol=1e-9,
            ppm_samples=2,
            samples=10,
        )
        report = tracker.report()
        assert report.passed, report.failures()
        assert "restart.relative_prox" in report.results
        assert "acg.induction" in report.results
