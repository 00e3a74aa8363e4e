"""Configuration: output paths, solver settings and experiment files."""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from hpe_bench.core.exceptions import ConfigError, ValidationError
from hpe_bench.core.generators import GENERATORS, build_problem
from hpe_bench.core.problem import CompositeProblem
from hpe_bench.core.validation import validate_count, validate_open_unit, validate_positive

SMOOTH_METHODS = ("restart_acg", "fista")
NONSMOOTH_METHODS = ("mpb", "subgradient")
METHODS = SMOOTH_METHODS + NONSMOOTH_METHODS

DEFAULT_REFERENCE_TOL = 1e-10


@dataclass(frozen=True)
class Paths:
    """Output directory layout.

    Attributes:
        out_dir: Root output directory.
    """

    out_dir: Path

    def trace_csv(self, label: str) -> Path:
        """Return path of the trace CSV of a method cell."""
        return self.out_dir / f"{label}.csv"

    @property
    def summary_json(self) -> Path:
        """Return path to the experiment summary."""
        return self.out_dir / "summary.json"

    @property
    def bench_csv(self) -> Path:
        """Return path to the scaling sweep table."""
        return self.out_dir / "bench.csv"

    @property
    def invariants_json(self) -> Path:
        """Return path to the invariant report."""
        return self.out_dir / "invariants.json"

    @property
    def problem_dir(self) -> Path:
        """Return directory for exported problem data."""
        return self.out_dir / "problem"


@dataclass(frozen=True)
class SolverSettings:
    """Per-method parameters.

    Attributes:
        lam: Stepsize; None picks the method default from d0 and eps_bar.
        lambda_scale: Stepsize as a multiple of 1/L (smooth methods only).
        sigma: Relative criterion constant of restart ACG.
        delta: MPB gap tolerance; None means eps_bar / 2.
        eps_bar: Target accuracy.
        max_outer: Outer iteration cap.
        max_inner: Inner iteration cap.
        max_iters: Iteration cap of the baselines.
        max_cuts: MPB bundle cap.
        dual_tol: MPB dual solver tolerance; None means delta / 10.
        budget_constant: C in the MPB oracle budget.
        record_every: Baseline row frequency.
    """

    lam: float | None = None
    lambda_scale: float | None = None
    sigma: float = 0.9
    delta: float | None = None
    eps_bar: float = 1e-4
    max_outer: int = 100_000
    max_inner: int = 10_000
    max_iters: int = 100_000
    max_cuts: int | None = None
    dual_tol: float | None = None
    budget_constant: float = 8.0
    record_every: int = 1

    def __post_init__(self) -> None:
        """Validate the settings."""
        validate_positive(self.eps_bar, "eps_bar")
        validate_open_unit(self.sigma, "sigma")
        for name in ("lam", "lambda_scale", "delta", "dual_tol"):
            value = getattr(self, name)
            if value is not None:
                validate_positive(value, name)
        for name in ("max_outer", "max_inner", "max_iters", "record_every"):
            validate_count(getattr(self, name), name)

    def merged(self, **overrides: Any) -> "SolverSettings":
        """Return a copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass(frozen=True)
class ProblemDescriptor:
    """Generator name, seed and generator parameters.

    Attributes:
        generator: Key of ``GENERATORS``.
        seed: Generator seed.
        params: Remaining generator keyword arguments.
    """

    generator: str
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check that the generator exists."""
        if self.generator not in GENERATORS:
            raise ConfigError(
                f"Unknown generator: {self.generator}. "
                f"Allowed: {', '.join(sorted(GENERATORS))}"
            )

    def build(self) -> CompositeProblem:
        """Build the problem."""
        return build_problem(self.generator, self.seed, dict(self.params))

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready view."""
        return {"generator": self.generator, "seed": self.seed, "params": dict(self.params)}


@dataclass(frozen=True)
class MethodSpec:
    """One method cell of an experiment.

    Attributes:
        label: Name used for the CSV file and in the summary.
        solver: One of ``METHODS``.
        settings: Solver parameters.
    """

    label: str
    solver: str
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self) -> None:
        """Check that the solver exists."""
        if self.solver not in METHODS:
            raise ConfigError(
                f"Unknown method: {self.solver}. Allowed: {', '.join(METHODS)}"
            )


@dataclass(frozen=True)
class ExperimentSpec:
    """Problem, method list and output location of an experiment.

    Attributes:
        problem: Problem descriptor.
        methods: Method cells, run and reported in this order.
        out_dir: Output directory.
        reference_tol: Tolerance of the reference solve.
        max_workers: Concurrent method cells.
    """

    problem: ProblemDescriptor
    methods: tuple[MethodSpec, ...] = ()
    out_dir: Path = Path("runs")
    reference_tol: float = DEFAULT_REFERENCE_TOL
    max_workers: int = 1

    def __post_init__(self) -> None:
        """Check label uniqueness and numeric fields."""
        labels = [m.label for m in self.methods]
        if len(labels) != len(set(labels)):
            raise ConfigError(f"method labels must be unique, got {labels}")
        validate_positive(self.reference_tol, "reference_tol")
        validate_count(self.max_workers, "max_workers")

    @property
    def paths(self) -> Paths:
        """Return the output layout."""
        return Paths(out_dir=self.out_dir)


def get_out_dir_from_env(default: str = "./runs") -> Path:
    """Get output directory path from environment variable.

    Args:
        default: Default path if HPE_BENCH_OUT_DIR is not set.

    Returns:
        Path to output directory.
    """
    return Path(os.getenv("HPE_BENCH_OUT_DIR", default))


def parse_value(text: str) -> Any:
    """Parse an int, a float, ``none`` or a bare string."""
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_problem_string(text: str, seed: int = 0) -> ProblemDescriptor:
    """Parse ``generator[:key=value,...]``, e.g. ``lasso:rows=80,cols=50,reg=0.1``.

    Args:
        text: Problem string.
        seed: Generator seed.

    Returns:
        ProblemDescriptor.

    Raises:
        ConfigError: If a parameter is not of the form key=value.
    """
    generator, _, rest = text.partition(":")
    params: dict[str, Any] = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"problem parameter must be key=value, got '{item}'")
        params[key.strip()] = parse_value(value)
    return ProblemDescriptor(generator=generator.strip(), seed=seed, params=params)


_SETTING_KEYS = {f.name for f in fields(SolverSettings)}
_SETTING_ALIASES = {"lambda": "lam"}


def settings_from_mapping(mapping: dict[str, str], section: str) -> SolverSettings:
    """Build SolverSettings from the keys of an experiment-file section.

    Args:
        mapping: Raw key/value pairs.
        section: Section name, for error messages.

    Returns:
        SolverSettings.

    Raises:
        ConfigError: On unknown keys or invalid values.
    """
    kwargs: dict[str, Any] = {}
    for key, raw in mapping.items():
        name = _SETTING_ALIASES.get(key, key)
        if name == "solver":
            continue
        if name not in _SETTING_KEYS:
            raise ConfigError(f"[{section}] unknown key '{key}'")
        kwargs[name] = parse_value(raw)
    try:
        return SolverSettings(**kwargs)
    except (TypeError, ValueError, ValidationError) as e:
        raise ConfigError(f"[{section}] {e}") from e


def load_experiment(path: Path, out_dir: Path | None = None) -> ExperimentSpec:
    """Load an experiment file (see docs/experiment-format.md).

    Args:
        path: INI-style experiment file.
        out_dir: Override for ``[output] out_dir``.

    Returns:
        ExperimentSpec.

    Raises:
        ConfigError: If the file is missing, malformed or inconsistent.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"experiment file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from e
    if not parser.has_section("problem"):
        raise ConfigError(f"{path}: missing [problem] section")

    raw_problem = dict(parser["problem"])
    generator = raw_problem.pop("generator", None)
    if generator is None:
        raise ConfigError(f"{path}: [problem] needs a generator")
    seed = parse_value(raw_problem.pop("seed", "0"))
    reference_tol = parse_value(raw_problem.pop("reference_tol", str(DEFAULT_REFERENCE_TOL)))
    problem = ProblemDescriptor(
        generator=generator.strip(),
        seed=seed,
        params={k: parse_value(v) for k, v in raw_problem.items()},
    )

    methods = []
    for section in parser.sections():
        if not section.startswith("method:"):
            continue
        label = section.split(":", 1)[1].strip()
        mapping = dict(parser[section])
        solver = mapping.get("solver", label).strip()
        methods.append(
            MethodSpec(label=label, solver=solver, settings=settings_from_mapping(mapping, section))
        )

    output = parser["output"] if parser.has_section("output") else {}
    if out_dir is None:
        out_dir = Path(output["out_dir"]) if "out_dir" in output else get_out_dir_from_env()
    max_workers = parse_value(output.get("max_workers", "1"))

    try:
        return ExperimentSpec(
            problem=problem,
            methods=tuple(methods),
            out_dir=Path(out_dir),
            reference_tol=reference_tol,
            max_workers=max_workers,
        )
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"{path}: {e}") from e
