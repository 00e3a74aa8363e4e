"""Pytest fixtures and test configuration for HPE Bench tests."""
from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest
from typer.testing import CliRunner

from hpe_bench.core.generators import (
    lasso_from_data,
    make_lasso,
    make_maxaffine,
    maxaffine_from_data,
)
from hpe_bench.core.problem import CompositeProblem, L1Norm
from hpe_bench.core.reference import clear_reference_cache


@pytest.fixture(autouse=True)
def fresh_reference_cache() -> Generator[None, None, None]:
    """Start and finish every test with an empty reference cache."""
    clear_reference_cache()
    yield
    clear_reference_cache()


@pytest.fixture
def temp_out_dir() -> Generator[Path, None, None]:
    """Create a temporary output directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for sample points."""
    return np.random.default_rng(1234)


@pytest.fixture
def scalar_ls() -> CompositeProblem:
    """f(x) = 0.5 (2x - 4)^2 with h = 0: L = mu = 4, optimum 0 at x = 2."""
    return lasso_from_data(np.array([[2.0]]), np.array([4.0]), 0.0)


@pytest.fixture
def scalar_lasso() -> CompositeProblem:
    """f(x) = 0.5 (x - 3)^2 with h = |x|: optimum 2.5 at x = 2."""
    return lasso_from_data(np.array([[1.0]]), np.array([3.0]), 1.0)


@pytest.fixture
def abs_problem() -> CompositeProblem:
    """f(u) = |u| as max(u, -u), h = 0: M = 1, optimum 0 at u = 0."""
    return maxaffine_from_data(np.array([[1.0], [-1.0]]), np.array([0.0, 0.0]))


@pytest.fixture
def small_lasso() -> CompositeProblem:
    """A 30 x 20 seeded LASSO instance."""
    return make_lasso(seed=3, rows=30, cols=20, reg=0.1)


@pytest.fixture
def small_maxaffine() -> CompositeProblem:
    """A seeded max-affine instance with 6 pieces in 4 variables."""
    return make_maxaffine(seed=5, pieces=6, cols=4)


@pytest.fixture
def l1_maxaffine() -> CompositeProblem:
    """A seeded max-affine instance with an l1 term."""
    return make_maxaffine(seed=7, pieces=5, cols=3, h=L1Norm(0.5))


@pytest.fixture
def experiment_file(temp_out_dir: Path) -> Path:
    """Write a small two-method experiment file."""
    path = temp_out_dir / "experiment.ini"
    path.write_text(
        "[problem]\n"
        "generator = lasso\n"
        "seed = 1\n"
        "rows = 30\n"
        "cols = 20\n"
        "reg = 0.1\n"
        "reference_tol = 1e-10\n"
        "\n"
        "[method:restart_acg]\n"
        "eps_bar = 1e-6\n"
        "lambda_scale = 10\n"
        "\n"
        "[method:fista]\n"
        "eps_bar = 1e-6\n"
        "max_iters = 20000\n"
        "\n"
        f"[output]\nout_dir = {temp_out_dir / 'runs'}\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def runner() -> CliRunner:
    """Create a CLI test runner."""
    return CliRunner()
