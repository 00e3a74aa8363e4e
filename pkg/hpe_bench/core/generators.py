"""Seeded test-problem generators and the matrix text format."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Callable

import numpy as np

from hpe_bench.core.exceptions import ValidationError
from hpe_bench.core.file_io import atomic_write_text
from hpe_bench.core.logger import get_logger
from hpe_bench.core.problem import (
    CompositeProblem,
    L1Norm,
    LeastSquares,
    MaxAffine,
    ProxFriendlyTerm,
    ZeroTerm,
)
from hpe_bench.core.validation import validate_count, validate_nonnegative

logger = get_logger("generators")


def lasso_from_data(A: np.ndarray, b: np.ndarray, reg: float) -> CompositeProblem:
    """Build ``0.5 * ||A x - b||^2 + reg * ||x||_1`` from explicit data.

    Closed-form optima are attached when they exist: ``x = 0`` when
    ``reg >= ||A^T b||_inf``, and the least-squares solution when ``reg == 0``
    and A has full column rank.

    Args:
        A: Design matrix (m, n).
        b: Observations (m,).
        reg: l1 weight, nonnegative.

    Returns:
        Smooth composite problem.
    """
    validate_nonnegative(reg, "reg")
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).reshape(-1)
    if A.shape[0] != b.shape[0]:
        raise ValidationError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")

    f = LeastSquares(A, b)
    h: ProxFriendlyTerm = L1Norm(reg) if reg > 0 else ZeroTerm()
    n = A.shape[1]

    known_optimum = None
    known_minimizer = None
    if reg > 0 and reg >= float(np.max(np.abs(A.T @ b))):
        known_minimizer = np.zeros(n)
        known_optimum = 0.5 * float(b @ b)
    elif reg == 0 and f.strong_convexity_mu_f > 0:
        known_minimizer = np.linalg.lstsq(A, b, rcond=None)[0]
        known_optimum = f.value_at(known_minimizer)

    return CompositeProblem(
        h=h,
        dimension=n,
        smooth_part=f,
        known_optimum=known_optimum,
        known_minimizer=known_minimizer,
        name="lasso",
    )


def make_lasso(
    seed: int = 0, rows: int = 80, cols: int = 50, reg: float = 0.1
) -> CompositeProblem:
    """Generate a seeded LASSO instance with Gaussian data.

    Args:
        seed: Generator seed; equal seeds give bitwise-identical data.
        rows: Number of observations.
        cols: Number of variables.
        reg: l1 weight.

    Returns:
        Smooth composite problem.
    """
    validate_count(rows, "rows")
    validate_count(cols, "cols")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rows, cols))
    b = rng.standard_normal(rows)
    problem = lasso_from_data(A, b, reg)
    logger.debug(
        f"lasso seed={seed} shape=({rows},{cols}) reg={reg} "
        f"L={problem.smooth_part.lipschitz_L:.6g}"
    )
    return problem


def maxaffine_from_data(
    G: np.ndarray,
    c: np.ndarray,
    h: ProxFriendlyTerm | None = None,
    known_optimum: float | None = None,
    known_minimizer: np.ndarray | None = None,
) -> CompositeProblem:
    """Build ``max_i <g_i, x> + c_i (+ h)`` from explicit data.

    Args:
        G: Slopes, one row per piece.
        c: Offsets.
        h: Prox-friendly term (zero by default).
        known_optimum: Optional closed-form optimal value.
        known_minimizer: Optional closed-form minimizer.

    Returns:
        Nonsmooth composite problem.
    """
    G = np.array(G, dtype=float, ndmin=2)
    c = np.array(c, dtype=float).reshape(-1)
    if G.shape[0] != c.shape[0]:
        raise ValidationError(f"G has {G.shape[0]} pieces but c has {c.shape[0]}")
    return CompositeProblem(
        h=h if h is not None else ZeroTerm(),
        dimension=G.shape[1],
        nonsmooth_part=MaxAffine(G, c),
        known_optimum=known_optimum,
        known_minimizer=known_minimizer,
        name="maxaffine",
    )


def make_maxaffine(
    seed: int = 0, pieces: int = 10, cols: int = 20, h: ProxFriendlyTerm | None = None
) -> CompositeProblem:
    """Generate a seeded max-of-affine instance that is bounded below.

    The last slope is a negative positive-weighted combination of the others,
    so 0 lies in the convex hull of the slopes.

    Args:
        seed: Generator seed.
        pieces: Number of affine pieces.
        cols: Number of variables.
        h: Prox-friendly term (zero by default).

    Returns:
        Nonsmooth composite problem.
    """
    validate_count(pieces, "pieces")
    validate_count(cols, "cols")
    rng = np.random.default_rng(seed)
    G = np.empty((pieces, cols))
    G[:-1] = rng.standard_normal((pieces - 1, cols))
    weights = rng.uniform(0.5, 1.5, size=pieces)
    G[-1] = -(weights[:-1] @ G[:-1]) / weights[-1]
    c = rng.standard_normal(pieces)
    return maxaffine_from_data(G, c, h=h)


GENERATORS: dict[str, Callable[..., CompositeProblem]] = {
    "lasso": make_lasso,
    "maxaffine": make_maxaffine,
}


def build_problem(generator: str, seed: int, params: dict[str, Any]) -> CompositeProblem:
    """Build a problem from a generator name and parameters.

    Args:
        generator: Key of GENERATORS.
        seed: Generator seed.
        params: Remaining keyword arguments for the generator.

    Returns:
        Generated problem.

    Raises:
        ValidationError: If the generator is unknown or parameters do not fit.
    """
    if generator not in GENERATORS:
        raise ValidationError(
            f"Unknown generator: {generator}. Allowed: {', '.join(sorted(GENERATORS))}"
        )
    try:
        return GENERATORS[generator](seed=seed, **params)
    except TypeError as e:
        raise ValidationError(f"Bad parameters for {generator}: {e}") from e


def write_matrix(path: Path, array: np.ndarray) -> None:
    """Write an array in the text format (vectors become one column).

    The file is a header line ``rows cols`` followed by the entries in row-major
    order, whitespace separated, with 17 significant digits.

    Args:
        path: Destination file; written atomically.
        array: 1-D or 2-D array.
    """
    mat = np.array(array, dtype=float)
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    lines = [f"{mat.shape[0]} {mat.shape[1]}"]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in mat)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix(path: Path) -> np.ndarray:
    """Read an array written by ``write_matrix``.

    Args:
        path: Source file.

    Returns:
        2-D array with the header's shape.

    Raises:
        ValidationError: If the header or an entry does not parse, or the
            entry count does not match the header.
    """
    tokens = Path(path).read_text(encoding="utf-8").split()
    if len(tokens) < 2:
        raise ValidationError(f"{path}: missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = np.array([float(t) for t in tokens[2:]])
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from e
    if rows < 0 or cols < 0:
        raise ValidationError(f"{path}: negative shape {rows}x{cols}")
    if values.size != rows * cols:
        raise ValidationError(
            f"{path}: header says {rows}x{cols} but found {values.size} entries"
        )
    return values.reshape(rows, cols)


def export_problem(problem: CompositeProblem, directory: Path) -> list[Path]:
    """Write the data of a generated problem, one file per array.

    LASSO instances write ``A.txt``, ``b.txt`` and ``reg.txt``; max-affine
    instances write ``G.txt`` and ``c.txt``.

    Args:
        problem: Problem built by this module.
        directory: Output directory (created if missing).

    Returns:
        Paths written.

    Raises:
        ValidationError: If the problem was not built from exportable data.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    f = problem.f
    if isinstance(f, LeastSquares):
        reg = problem.h.weight if isinstance(problem.h, L1Norm) else 0.0
        arrays = {"A": f.A, "b": f.b, "reg": np.array([reg])}
    elif isinstance(f, MaxAffine):
        arrays = {"G": f.G, "c": f.c}
    else:
        raise ValidationError(f"cannot export a problem with f={type(f).__name__}")

    written = []
    for key, arr in arrays.items():
        path = directory / f"{key}.txt"
        write_matrix(path, arr)
        written.append(path)
    logger.info(f"Exported {problem.name} to {directory}")
    return written


def load_problem(directory: Path) -> CompositeProblem:
    """Rebuild a problem exported by ``export_problem``.

    Args:
        directory: Directory holding the array files.

    Returns:
        Composite problem.

    Raises:
        ValidationError: If the directory holds neither layout.
    """
    directory = Path(directory)
    if (directory / "A.txt").exists():
        reg = float(read_matrix(directory / "reg.txt")[0, 0])
        return lasso_from_data(
            read_matrix(directory / "A.txt"), read_matrix(directory / "b.txt"), reg
        )
    if (directory / "G.txt").exists():
        return maxaffine_from_data(
            read_matrix(directory / "G.txt"), read_matrix(directory / "c.txt")
        )
    raise ValidationError(f"{directory}: no exported problem found")

