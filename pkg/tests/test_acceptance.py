"""Rate, scaling and comparison checks on the seeded benchmark suites."""
from __future__ import annotations

import math

import numpy as np
import pytest

from hpe_bench.config import MethodSpec, ProblemDescriptor, SolverSettings
from hpe_bench.core.reference import reference_solve
from hpe_bench.core.restart_acg import inner_iteration_bound, solve
from hpe_bench.pipelines.bench import run_bench
from hpe_bench.pipelines.experiment import reference_for, run_method, starting_point
from hpe_bench.pipelines.verify import verify_invariants

SEEDS = range(5)
REF_TOL = 1e-10


def _lasso(seed: int) -> ProblemDescriptor:
    return ProblemDescriptor("lasso", seed, {"rows": 80, "cols": 50, "reg": 0.1})


def _maxaffine(seed: int) -> ProblemDescriptor:
    return ProblemDescriptor("maxaffine", seed, {"pieces": 10, "cols": 20})


@pytest.mark.slow
class TestRestartAcgRates:
    """Outer rate and inner bound on the LASSO suite."""

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("scale", [1.0, 10.0])
    def test_outer_rate_and_inner_bound(self, seed, scale):
        """Test the 2 d0^2 / (lam k^2) rate and the exact inner count bound."""
        problem = _lasso(seed).build()
        ref = reference_solve(problem, REF_TOL)
        x0 = np.zeros(problem.dimension)
        d0 = float(np.linalg.norm(x0 - ref.x_ref))
        L = problem.smooth_part.lipschitz_L
        lam = scale / L

        run = solve(problem, x0, lam, 1e-8, phi_ref=ref.phi_ref, d0_estimate=d0)
        bound = inner_iteration_bound(lam, L)
        for row in run.rows:
            assert row.phi - ref.phi_ref <= 2.0 * d0 * d0 / (lam * row.k**2) + 10.0 * REF_TOL
            assert row.inner_iters <= bound


@pytest.mark.slow
class TestComplexityScaling:
    """Total work against eps_bar and lam."""

    def test_total_inner_within_sqrt_growth(self, temp_out_dir):
        """Test total inner iterations grow no faster than 3 eps_bar^(-1/2) across the sweep."""
        eps_bars = (1e-1, 1e-2, 1e-3, 1e-4)
        rows = run_bench(problem=_lasso(0), out_dir=temp_out_dir, eps_bars=eps_bars)
        base = rows[0]
        for row in rows[1:]:
            allowed = 3.0 * math.sqrt(base.eps_bar / row.eps_bar) * max(base.total_inner, 1)
            assert base.total_inner <= row.total_inner <= allowed
            if row.predicted is not None:
                assert row.total_inner <= row.predicted
        assert (temp_out_dir / "bench.csv").is_file()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_lambda_growth_cuts_outer_steps(self, seed):
        """Test lam x10 cuts the outer count by at least sqrt(10)/3 at a fixed eps_bar."""
        problem = _lasso(seed).build()
        ref = reference_solve(problem, REF_TOL)
        x0 = np.zeros(problem.dimension)
        d0 = float(np.linalg.norm(x0 - ref.x_ref))
        L = problem.smooth_part.lipschitz_L
        counts = [
            len(solve(problem, x0, scale / L, 1e-6, phi_ref=ref.phi_ref, d0_estimate=d0).rows)
            for scale in (1.0, 10.0)
        ]
        assert counts[1] <= counts[0]
        assert counts[0] / counts[1] >= math.sqrt(10.0) / 3.0


@pytest.mark.slow
class TestInvariantSuites:
    """Instrumented runs over the seeded suites."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_restart_acg_suite(self, seed):
        """Test the ACG, restart and relative-prox invariants on the LASSO suite."""
        report = verify_invariants(
            problem=_lasso(seed),
            method=MethodSpec("restart_acg", "restart_acg", SolverSettings(eps_bar=1e-6, lambda_scale=10.0)),
            reference_tol=REF_TOL,
            samples=20,
            ppm_samples=5,
            rng_seed=seed,
        )
        assert report.passed, report.failures()
        for name in ("acg.tau_identity", "acg.a_root", "acg.A_growth", "acg.induction", "restart.relative_prox"):
            assert name in report.results

    @pytest.mark.parametrize("seed", SEEDS)
    def test_mpb_suite(self, seed):
        """Test t_j <= delta, the certificate identity and the criterion on the max-affine suite."""
        report = verify_invariants(
            problem=_maxaffine(seed),
            method=MethodSpec("mpb", "mpb", SolverSettings(eps_bar=1e-2)),
            reference_tol=1e-8,
            samples=20,
            rng_seed=seed,
        )
        assert report.passed, report.failures()
        for name in (
            "mpb.gap_closed",
            "mpb.certificate_identity",
            "mpb.criterion",
            "mpb.eps_subgradient",
            "mpb.prox_lower_bound",
        ):
            assert name in report.results


@pytest.mark.slow
class TestMpbAgainstSubgradient:
    """Oracle-call comparison on the max-affine suite."""

    def test_mpb_uses_fewer_calls(self):
        """Test MPB reaches eps_bar = 1e-2 with fewer calls than the subgradient method on most seeds."""
        wins = 0
        for seed in SEEDS:
            problem = _maxaffine(seed).build()
            x0 = starting_point(problem)
            reference = reference_for(problem, 1e-8)
            settings = SolverSettings(eps_bar=1e-2)
            mpb = run_method(problem, x0, MethodSpec("mpb", "mpb", settings), reference)
            sub = run_method(problem, x0, MethodSpec("subgradient", "subgradient", settings), reference)

            mpb_calls = mpb.calls_to_reach(reference.phi_ref, 1e-2)
            sub_calls = sub.calls_to_reach(reference.phi_ref, 1e-2)
            assert mpb_calls is not None
            if sub_calls is None or mpb_calls < sub_calls:
                wins += 1
        assert wins >= 4
