"""Core functionality tests for type utilities, validation and file output."""
from __future__ import annotations

import logging

import numpy as np
import pytest

from hpe_bench.core.exceptions import BudgetExhaustedError, SolverError, ValidationError
from hpe_bench.core.file_io import atomic_write_text
from hpe_bench.core.logger import ROOT_LOGGER, get_logger, setup_logging
from hpe_bench.core.types import TRACE_COLUMNS, HpeTriple, RunStatus, RunTrace, TraceRow
from hpe_bench.core.validation import (
    validate_count,
    validate_dimension,
    validate_nonnegative,
    validate_open_unit,
    validate_positive,
)


class TestTypes:
    """Tests for type definitions."""

    def test_criterion_lhs(self):
        """Test the HPE left-hand side adds 2 lam eta to the residual."""
        triple = HpeTriple(
            w_tilde=np.zeros(2), u=np.ones(2), eta=0.25, residual_sq=1.5, criterion_rhs=3.0
        )
        assert triple.criterion_lhs(2.0) == pytest.approx(2.5)

    def test_trace_columns(self):
        """Test the trace schema is fixed."""
        assert ",".join(TRACE_COLUMNS) == "k,inner_iters,oracle_calls,phi,bound,seconds"

    def test_run_trace_append_ordered(self):
        """Test rows are accepted in order and totals are derived from them."""
        run = RunTrace(method="demo")
        run.append(TraceRow(1, 3, 6, 2.0, None, 0.1))
        run.append(TraceRow(2, 4, 14, 1.0, 0.5, 0.2))

        assert run.total_oracle_calls == 14
        assert run.total_inner_iters == 7
        assert run.status is RunStatus.FAILED

    def test_run_trace_rejects_decreasing_counter(self):
        """Test a row with fewer cumulative calls is rejected."""
        run = RunTrace(method="demo")
        run.append(TraceRow(1, 1, 10, 2.0, None, 0.0))
        with pytest.raises(ValueError):
            run.append(TraceRow(2, 1, 9, 1.0, None, 0.0))
        with pytest.raises(ValueError):
            run.append(TraceRow(0, 1, 12, 1.0, None, 0.0))

    def test_calls_to_reach(self):
        """Test the first qualifying row is reported."""
        run = RunTrace(method="demo")
        for k, phi in enumerate([1.0, 0.1, 0.001, 0.0001], start=1):
            run.append(TraceRow(k, 1, 2 * k, phi, None, 0.0))

        assert run.calls_to_reach(0.0, 1e-2) == 6
        assert run.calls_to_reach(0.0, 1e-4) == 8
        assert run.calls_to_reach(0.0, 1e-6) is None


class TestValidation:
    """Tests for argument checks."""

    def test_validate_positive(self):
        """Test positive finite numbers pass and others raise."""
        assert validate_positive(1e-12, "x")
        for bad in (0.0, -1.0, float("inf"), float("nan"), "1"):
            with pytest.raises(ValidationError):
                validate_positive(bad, "x")

    def test_validate_nonnegative(self):
        """Test zero passes and negatives raise."""
        assert validate_nonnegative(0.0, "x")
        with pytest.raises(ValidationError):
            validate_nonnegative(-1e-300, "x")

    def test_validate_open_unit(self):
        """Test the open interval excludes its endpoints."""
        assert validate_open_unit(0.5, "sigma")
        for bad in (0.0, 1.0):
            with pytest.raises(ValidationError):
                validate_open_unit(bad, "sigma")

    def test_validate_count(self):
        """Test counts respect their minimum."""
        assert validate_count(1, "n")
        with pytest.raises(ValidationError):
            validate_count(0, "n")
        with pytest.raises(ValidationError):
            validate_count(1, "max_cuts", minimum=2)

    def test_validate_dimension(self):
        """Test a length mismatch raises."""
        assert validate_dimension(np.zeros(3), 3)
        with pytest.raises(ValidationError):
            validate_dimension(np.zeros(2), 3)


class TestErrors:
    """Tests for the error hierarchy."""

    def test_budget_error_carries_partial(self):
        """Test the partial result travels with the error."""
        run = RunTrace(method="demo")
        err = BudgetExhaustedError("out of budget", partial=run)
        assert isinstance(err, SolverError)
        assert err.partial is run


class TestFileIO:
    """Tests for atomic writes."""

    def test_atomic_write_creates_parents(self, temp_out_dir):
        """Test the file lands with its content and no temp file remains."""
        path = temp_out_dir / "a" / "b" / "out.txt"
        atomic_write_text(path, "hello\n")

        assert path.read_text(encoding="utf-8") == "hello\n"
        assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


class TestLogging:
    """Tests for the package logger."""

    def test_child_logger_names(self):
        """Test module loggers hang off the package logger."""
        assert get_logger("bundle").name == "hpe_bench.bundle"
        assert get_logger().name == ROOT_LOGGER

    def test_file_handler_and_unknown_level(self, temp_out_dir):
        """Test an unknown level falls back to INFO and records reach the log file."""
        path = temp_out_dir / "logs" / "run.log"
        try:
            root = setup_logging(log_level="chatty", log_file=path, log_to_console=False)
            assert root.level == logging.INFO
            get_logger("test").info("outer step 3 accepted")
            for handler in root.handlers:
                handler.flush()
            assert "hpe_bench.test: outer step 3 accepted" in path.read_text(encoding="utf-8")
        finally:
            setup_logging(log_level="WARNING")
