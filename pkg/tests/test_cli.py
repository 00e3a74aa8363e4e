"""End-to-end tests for the hpe-bench command line."""
from __future__ import annotations

import json

import numpy as np
import pytest

from hpe_bench.cli import app
from hpe_bench.config import parse_problem_string
from hpe_bench.core.generators import load_problem
from hpe_bench.core.problem import fingerprint

SMALL_LASSO = "lasso:rows=20,cols=10,reg=0.1"


def _rows_without_seconds(text: str) -> list[str]:
    return [line.rsplit(",", 1)[0] for line in text.splitlines()]


@pytest.mark.integration
class TestSolveCommand:
    """Tests for `hpe-bench solve`."""

    def test_restart_acg_trace(self, runner, temp_out_dir):
        """Test a solve writes the trace CSV and reports the reference gaps."""
        result = runner.invoke(
            app,
            [
                "solve",
                "--problem",
                SMALL_LASSO,
                "--seed",
                "1",
                "--eps-bar",
                "1e-6",
                "--lambda-scale",
                "10",
                "--out-dir",
                str(temp_out_dir),
            ],
        )
        assert result.exit_code == 0, result.output

        data = json.loads(result.stdout)
        assert data["status"] == "converged"
        assert data["csv"] == "restart_acg.csv"
        assert set(data["calls_to_gap"]) == {"1e-02", "1e-03", "1e-04"}
        assert all(v is not None for v in data["calls_to_gap"].values())

        lines = (temp_out_dir / "restart_acg.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "k,inner_iters,oracle_calls,phi,bound,seconds"
        assert len(lines) - 1 == data["outer_iters"]
        assert (temp_out_dir / "summary.json").is_file()

    def test_subgradient_trace_has_empty_bound(self, runner, temp_out_dir):
        """Test a method without a rate bound leaves the bound field empty."""
        result = runner.invoke(
            app,
            [
                "solve",
                "--problem",
                "maxaffine:pieces=6,cols=4",
                "--method",
                "subgradient",
                "--eps-bar",
                "1e-2",
                "--max-iters",
                "20000",
                "--out-dir",
                str(temp_out_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        first = (temp_out_dir / "subgradient.csv").read_text(encoding="utf-8").splitlines()[1]
        assert first.split(",")[4] == ""

    def test_unknown_method(self, runner, temp_out_dir):
        """Test an unknown method is a usage error."""
        result = runner.invoke(app, ["solve", "--method", "newton", "--out-dir", str(temp_out_dir)])
        assert result.exit_code == 2

    def test_bad_sigma(self, runner, temp_out_dir):
        """Test sigma outside (0, 1) is a usage error."""
        result = runner.invoke(app, ["solve", "--sigma", "1.5", "--out-dir", str(temp_out_dir)])
        assert result.exit_code == 2

    def test_budget_exhausted(self, runner, temp_out_dir):
        """Test an exhausted budget exits 1 and keeps the partial trace."""
        result = runner.invoke(
            app,
            [
                "solve",
                "--problem",
                SMALL_LASSO,
                "--eps-bar",
                "1e-12",
                "--lambda-scale",
                "1",
                "--max-outer",
                "2",
                "--out-dir",
                str(temp_out_dir),
            ],
        )
        assert result.exit_code == 1
        lines = (temp_out_dir / "restart_acg.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 3


@pytest.mark.integration
class TestCompareCommand:
    """Tests for `hpe-bench compare`."""

    def test_compare_experiment(self, runner, experiment_file, temp_out_dir):
        """Test every cell writes a CSV and the summary keeps file order."""
        result = runner.invoke(app, ["compare", str(experiment_file)])
        assert result.exit_code == 0, result.output

        summary = json.loads((temp_out_dir / "runs" / "summary.json").read_text(encoding="utf-8"))
        assert [m["label"] for m in summary["methods"]] == ["restart_acg", "fista"]
        assert summary["reference"]["certified"] is True
        for entry in summary["methods"]:
            assert entry["status"] == "converged"
            assert entry["phi_final"] - summary["reference"]["phi_ref"] <= 1e-6
            assert "seconds" not in entry
            assert (temp_out_dir / "runs" / entry["csv"]).is_file()

    def test_reruns_are_identical(self, runner, experiment_file, temp_out_dir):
        """Test two runs give the same CSVs apart from wall time."""
        for name in ("a", "b"):
            result = runner.invoke(
                app, ["compare", str(experiment_file), "--out-dir", str(temp_out_dir / name)]
            )
            assert result.exit_code == 0, result.output
        for label in ("restart_acg", "fista"):
            a = (temp_out_dir / "a" / f"{label}.csv").read_text(encoding="utf-8")
            b = (temp_out_dir / "b" / f"{label}.csv").read_text(encoding="utf-8")
            assert _rows_without_seconds(a) == _rows_without_seconds(b)

    def test_parallel_cells_match_serial(self, runner, experiment_file, temp_out_dir):
        """Test running cells concurrently does not change the traces."""
        runner.invoke(app, ["compare", str(experiment_file), "--out-dir", str(temp_out_dir / "s")])
        result = runner.invoke(
            app,
            ["compare", str(experiment_file), "--max-workers", "2", "--out-dir", str(temp_out_dir / "p")],
        )
        assert result.exit_code == 0, result.output
        s = (temp_out_dir / "s" / "fista.csv").read_text(encoding="utf-8")
        p = (temp_out_dir / "p" / "fista.csv").read_text(encoding="utf-8")
        assert _rows_without_seconds(s) == _rows_without_seconds(p)

    def test_empty_method_list(self, runner, temp_out_dir):
        """Test an experiment without methods still writes a summary."""
        path = temp_out_dir / "empty.ini"
        path.write_text("[problem]\ngenerator = lasso\nrows = 10\ncols = 5\n", encoding="utf-8")
        result = runner.invoke(app, ["compare", str(path), "--out-dir", str(temp_out_dir / "out")])
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["methods"] == []

    def test_failing_cell(self, runner, temp_out_dir):
        """Test a mismatched method fails its cell, keeps the others and exits 1."""
        path = temp_out_dir / "mixed.ini"
        path.write_text(
            "[problem]\ngenerator = lasso\nrows = 10\ncols = 5\n\n"
            "[method:mpb]\neps_bar = 1e-3\n\n[method:fista]\neps_bar = 1e-6\n",
            encoding="utf-8",
        )
        result = runner.invoke(app, ["compare", str(path), "--out-dir", str(temp_out_dir / "out")])
        assert result.exit_code == 1
        methods = {m["label"]: m for m in json.loads(result.stdout)["methods"]}
        assert methods["mpb"]["error"] is not None
        assert methods["fista"]["status"] == "converged"

    def test_missing_file(self, runner, temp_out_dir):
        """Test a missing experiment file is a usage error."""
        result = runner.invoke(app, ["compare", str(temp_out_dir / "missing.ini")])
        assert result.exit_code == 2


@pytest.mark.integration
class TestVerifyCommand:
    """Tests for `hpe-bench verify`."""

    def test_restart_acg_passes(self, runner, temp_out_dir):
        """Test every invariant of a healthy restart ACG run passes."""
        result = runner.invoke(
            app,
            [
                "verify",
                "--problem",
                SMALL_LASSO,
                "--eps-bar",
                "1e-6",
                "--lambda-scale",
                "10",
                "--samples",
                "5",
                "--ppm-samples",
                "2",
                "--out-dir",
                str(temp_out_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((temp_out_dir / "invariants.json").read_text(encoding="utf-8"))
        assert report["passed"] is True
        assert "acg.certificate_identity" in report["invariants"]
        assert "restart.outer_rate" in report["invariants"]

    @pytest.mark.slow
    def test_mpb_passes(self, runner, temp_out_dir):
        """Test every invariant of a healthy MPB run passes."""
        result = runner.invoke(
            app,
            [
                "verify",
                "--problem",
                "maxaffine:pieces=6,cols=4",
                "--method",
                "mpb",
                "--eps-bar",
                "1e-3",
                "--samples",
                "5",
                "--out-dir",
                str(temp_out_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["invariants"]["mpb.cut_valid"]["passed"] is True

    def test_uninstrumented_method(self, runner, temp_out_dir):
        """Test verify rejects methods without a recorder."""
        result = runner.invoke(app, ["verify", "--method", "fista", "--out-dir", str(temp_out_dir)])
        assert result.exit_code == 2


@pytest.mark.integration
class TestBenchAndGenerate:
    """Tests for `hpe-bench bench` and `hpe-bench generate`."""

    def test_bench_table(self, runner, temp_out_dir):
        """Test bench.csv has one row per eps_bar."""
        result = runner.invoke(
            app,
            ["bench", "--problem", SMALL_LASSO, "--eps-bars", "1e-2,1e-3", "--out-dir", str(temp_out_dir)],
        )
        assert result.exit_code == 0, result.output
        lines = (temp_out_dir / "bench.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "eps_bar,lambda,outer,total_inner,oracle_calls,predicted"
        assert len(lines) == 3
        rows = json.loads(result.stdout)
        assert [r["eps_bar"] for r in rows] == [1e-2, 1e-3]
        assert all(r["predicted"] is None or r["predicted"] >= 1 for r in rows)

    def test_bench_bad_list(self, runner, temp_out_dir):
        """Test a malformed eps_bar list is a usage error."""
        result = runner.invoke(app, ["bench", "--eps-bars", "a,b", "--out-dir", str(temp_out_dir)])
        assert result.exit_code == 2

    def test_generate(self, runner, temp_out_dir):
        """Test the exported files rebuild the same instance."""
        result = runner.invoke(
            app, ["generate", "--problem", SMALL_LASSO, "--seed", "3", "--out-dir", str(temp_out_dir)]
        )
        assert result.exit_code == 0, result.output
        loaded = load_problem(temp_out_dir / "problem")
        built = parse_problem_string(SMALL_LASSO, seed=3).build()
        assert fingerprint(loaded) == fingerprint(built)
        x = np.linspace(-1.0, 1.0, built.dimension)
        assert loaded.smooth_part.value_at(x) == built.smooth_part.value_at(x)
