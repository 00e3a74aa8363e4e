"""Tests for settings, problem strings and experiment files."""
from __future__ import annotations

from pathlib import Path

import pytest

from hpe_bench.config import (
    ExperimentSpec,
    MethodSpec,
    Paths,
    ProblemDescriptor,
    SolverSettings,
    get_out_dir_from_env,
    load_experiment,
    parse_problem_string,
    parse_value,
    settings_from_mapping,
)
from hpe_bench.core.exceptions import ConfigError, ValidationError


class TestPaths:
    """Tests for the output layout."""

    def test_layout(self, temp_out_dir):
        """Test file names under the output directory."""
        paths = Paths(out_dir=temp_out_dir)
        assert paths.trace_csv("fista") == temp_out_dir / "fista.csv"
        assert paths.summary_json.name == "summary.json"
        assert paths.bench_csv.name == "bench.csv"
        assert paths.invariants_json.name == "invariants.json"
        assert paths.problem_dir == temp_out_dir / "problem"

    def test_env_out_dir(self, monkeypatch):
        """Test HPE_BENCH_OUT_DIR overrides the default."""
        monkeypatch.setenv("HPE_BENCH_OUT_DIR", "/tmp/elsewhere")
        assert get_out_dir_from_env() == Path("/tmp/elsewhere")
        monkeypatch.delenv("HPE_BENCH_OUT_DIR")
        assert get_out_dir_from_env() == Path("./runs")


class TestSettings:
    """Tests for SolverSettings."""

    def test_defaults(self):
        """Test the default accuracy and sigma."""
        s = SolverSettings()
        assert s.eps_bar == 1e-4
        assert s.sigma == 0.9
        assert s.lam is None

    def test_merged_skips_none(self):
        """Test None overrides keep the current value."""
        s = SolverSettings(eps_bar=1e-3).merged(eps_bar=None, lam=0.5)
        assert s.eps_bar == 1e-3
        assert s.lam == 0.5

    def test_invalid_values(self):
        """Test nonpositive values are usage errors."""
        with pytest.raises(ValidationError):
            SolverSettings(eps_bar=0.0)
        with pytest.raises(ValidationError):
            SolverSettings(max_outer=0)

    def test_from_mapping(self):
        """Test the lambda alias, value parsing and unknown keys."""
        s = settings_from_mapping({"lambda": "0.25", "max_outer": "7", "solver": "mpb"}, "method:x")
        assert s.lam == 0.25
        assert s.max_outer == 7
        with pytest.raises(ConfigError, match="unknown key 'depth'"):
            settings_from_mapping({"depth": "3"}, "method:x")


class TestProblemStrings:
    """Tests for generator[:key=value,...] strings."""

    def test_parse_value(self):
        """Test int, float, none and string values."""
        assert parse_value("3") == 3
        assert parse_value("1e-3") == 1e-3
        assert parse_value("None") is None
        assert parse_value("l1") == "l1"

    def test_parse_problem_string(self):
        """Test parameters become generator keywords."""
        d = parse_problem_string("lasso:rows=80,cols=50,reg=0.1", seed=4)
        assert d.generator == "lasso"
        assert d.seed == 4
        assert d.params == {"rows": 80, "cols": 50, "reg": 0.1}
        assert d.build().dimension == 50

    def test_bare_generator(self):
        """Test a generator name alone uses its defaults."""
        assert parse_problem_string("maxaffine").params == {}

    def test_bad_strings(self):
        """Test malformed parameters and unknown generators."""
        with pytest.raises(ConfigError):
            parse_problem_string("lasso:rows")
        with pytest.raises(ConfigError):
            parse_problem_string("qp:rows=3")


class TestExperimentSpec:
    """Tests for experiment descriptions."""

    def test_unknown_method(self):
        """Test a solver outside the method list is rejected."""
        with pytest.raises(ConfigError):
            MethodSpec(label="x", solver="newton")

    def test_duplicate_labels(self):
        """Test labels must be unique."""
        m = MethodSpec(label="a", solver="fista")
        with pytest.raises(ConfigError):
            ExperimentSpec(problem=ProblemDescriptor("lasso"), methods=(m, m))

    def test_load_file(self, experiment_file, temp_out_dir):
        """Test the fixture file loads with methods in file order."""
        spec = load_experiment(experiment_file)
        assert spec.problem.generator == "lasso"
        assert spec.problem.seed == 1
        assert spec.problem.params == {"rows": 30, "cols": 20, "reg": 0.1}
        assert [m.label for m in spec.methods] == ["restart_acg", "fista"]
        assert spec.methods[0].settings.lambda_scale == 10
        assert spec.methods[1].settings.max_iters == 20000
        assert spec.out_dir == temp_out_dir / "runs"
        assert spec.reference_tol == 1e-10

    def test_solver_key_and_override(self, temp_out_dir):
        """Test a labelled cell with an explicit solver and an out_dir override."""
        path = temp_out_dir / "e.ini"
        path.write_text(
            "[problem]\ngenerator = maxaffine\n\n[method:fine]\nsolver = mpb\nmax_cuts = 20\n",
            encoding="utf-8",
        )
        spec = load_experiment(path, out_dir=temp_out_dir / "o")
        assert spec.methods[0].label == "fine"
        assert spec.methods[0].solver == "mpb"
        assert spec.methods[0].settings.max_cuts == 20
        assert spec.out_dir == temp_out_dir / "o"

    def test_empty_method_list(self, temp_out_dir):
        """Test a file without method sections is valid."""
        path = temp_out_dir / "e.ini"
        path.write_text("[problem]\ngenerator = lasso\n", encoding="utf-8")
        assert load_experiment(path).methods == ()

    @pytest.mark.parametrize(
        "text",
        [
            "[method:fista]\neps_bar = 1e-3\n",
            "[problem]\nseed = 1\n",
            "[problem]\ngenerator = lasso\n[method:fista]\neps_bar = -1\n",
            "[problem]\ngenerator = lasso\n[output]\nmax_workers = 0\n",
            "not an ini file",
        ],
    )
    def test_invalid_files(self, temp_out_dir, text):
        """Test malformed files raise ConfigError."""
        path = temp_out_dir / "bad.ini"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_missing_file(self, temp_out_dir):
        """Test a missing file raises ConfigError."""
        with pytest.raises(ConfigError):
            load_experiment(temp_out_dir / "nope.ini")
