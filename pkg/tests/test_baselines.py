"""Tests for the FISTA and subgradient baselines."""
from __future__ import annotations

import math

import numpy as np
import pytest

from hpe_bench.core.baselines import (
    BaselineConfig,
    fista_momentum,
    fista_solve,
    subgradient_solve,
)
from hpe_bench.core.exceptions import ValidationError
from hpe_bench.core.generators import make_maxaffine
from hpe_bench.core.problem import BoxIndicator, CompositeProblem, LeastSquares
from hpe_bench.core.reference import reference_solve
from hpe_bench.core.types import RunStatus


class TestFista:
    """Tests for FISTA."""

    def test_momentum(self):
        """Test t_2 = (1 + sqrt 5)/2 from t_1 = 1."""
        assert fista_momentum(1.0) == pytest.approx((1.0 + math.sqrt(5.0)) / 2.0)

    def test_scalar_least_squares(self, scalar_ls):
        """Test the 1/L step lands on the minimizer at once, two calls per iteration."""
        run = fista_solve(scalar_ls, np.zeros(1), BaselineConfig(max_iters=200, target_gap=1e-10), phi_ref=0.0)
        assert run.status is RunStatus.CONVERGED
        assert run.phi_final <= 1e-10
        assert run.rows[0].oracle_calls == 2
        np.testing.assert_allclose(run.x_final, [2.0])

    def test_reaches_reference(self, small_lasso):
        """Test FISTA reaches a 1e-8 gap with the cumulative count at 2 per iteration."""
        ref = reference_solve(small_lasso, 1e-10)
        run = fista_solve(
            small_lasso,
            np.zeros(small_lasso.dimension),
            BaselineConfig(max_iters=50_000, target_gap=1e-8),
            phi_ref=ref.phi_ref,
        )
        assert run.status is RunStatus.CONVERGED
        assert run.rows[-1].phi - ref.phi_ref <= 1e-8
        assert all(row.oracle_calls == 2 * row.k for row in run.rows)

    def test_bound_column(self, small_lasso):
        """Test the rate bound 2 L d0^2 / (k+1)^2 dominates the gap."""
        ref = reference_solve(small_lasso, 1e-10)
        x0 = np.zeros(small_lasso.dimension)
        d0 = float(np.linalg.norm(x0 - ref.x_ref))
        run = fista_solve(small_lasso, x0, BaselineConfig(max_iters=100), d0_estimate=d0)
        for row in run.rows:
            assert row.phi - ref.phi_ref <= row.bound + 1e-9

    def test_budget_status(self, small_lasso):
        """Test an unreached target gap ends in BUDGET without raising."""
        run = fista_solve(
            small_lasso,
            np.zeros(small_lasso.dimension),
            BaselineConfig(max_iters=3, target_gap=1e-12),
            phi_ref=0.0,
        )
        assert run.status is RunStatus.BUDGET
        assert len(run.rows) == 3

    def test_record_every(self, small_lasso):
        """Test thinned rows still carry the inner count since the last row."""
        run = fista_solve(small_lasso, np.zeros(small_lasso.dimension), BaselineConfig(max_iters=10, record_every=4))
        assert [row.k for row in run.rows] == [4, 8, 10]
        assert [row.inner_iters for row in run.rows] == [4, 4, 2]

    def test_box_feasible(self, rng):
        """Test every iterate stays inside the box."""
        A = rng.standard_normal((8, 3))
        problem = CompositeProblem(
            h=BoxIndicator(0.0, 1.0), dimension=3, smooth_part=LeastSquares(A, rng.standard_normal(8))
        )
        run = fista_solve(problem, np.zeros(3), BaselineConfig(max_iters=50))
        assert all(math.isfinite(row.phi) for row in run.rows)
        assert np.all((run.x_final >= 0.0) & (run.x_final <= 1.0))

    def test_nonsmooth_rejected(self, small_maxaffine):
        """Test FISTA needs a smooth problem."""
        with pytest.raises(ValidationError):
            fista_solve(small_maxaffine, np.zeros(small_maxaffine.dimension))


class TestSubgradient:
    """Tests for the fixed-step proximal subgradient method."""

    def test_abs_value(self, abs_problem):
        """Test |u| from 1 with eps_bar = 0.5 reaches the gap in two calls."""
        run = subgradient_solve(abs_problem, np.array([1.0]), 0.5, phi_ref=0.0)
        assert run.config["stepsize"] == pytest.approx(0.5)
        assert run.status is RunStatus.CONVERGED
        assert [row.phi for row in run.rows] == pytest.approx([1.0, 0.5])
        assert run.total_oracle_calls == 2

    def test_running_best(self, small_maxaffine):
        """Test the reported value never increases."""
        run = subgradient_solve(
            small_maxaffine, np.ones(small_maxaffine.dimension), 1e-2, BaselineConfig(max_iters=300)
        )
        phis = [row.phi for row in run.rows]
        assert all(b <= a for a, b in zip(phis, phis[1:]))
        assert all(row.oracle_calls == row.k for row in run.rows)

    def test_box_feasible(self):
        """Test the prox step keeps iterates in the box."""
        problem = make_maxaffine(seed=2, pieces=4, cols=3, h=BoxIndicator(-0.5, 0.5))
        run = subgradient_solve(problem, np.zeros(3), 1e-2, BaselineConfig(max_iters=200))
        assert all(math.isfinite(row.phi) for row in run.rows)
        assert np.all(np.abs(run.x_final) <= 0.5)

    def test_smooth_rejected(self, small_lasso):
        """Test the subgradient method needs a nonsmooth problem."""
        with pytest.raises(ValidationError):
            subgradient_solve(small_lasso, np.zeros(small_lasso.dimension), 1e-2)

    def test_bad_config(self):
        """Test nonpositive caps are rejected."""
        with pytest.raises(ValidationError):
            BaselineConfig(max_iters=0)
        with pytest.raises(ValidationError):
            BaselineConfig(target_gap=0.0)
