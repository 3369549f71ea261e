"""
Tests for the models module.
"""

import math

import numpy as np
import pytest

from errors import DomainError
from models import (
    TRACE_KEYS,
    AffineMinorant,
    InnerConfig,
    InnerResult,
    MinorantEvaluation,
    RootConfig,
    RootResult,
    RootStatus,
    RunConfig,
    Solution,
    SolveStatus,
    SolveTrace,
    TraceFormat,
    TraceRecord,
)


class TestRootConfig:
    """Test cases for the RootConfig model."""

    def test_defaults(self):
        """Test the default safeguards."""
        cfg = RootConfig(epsilon=1e-2, alpha=1.3)

        assert cfg.max_outer == 200
        assert cfg.tau0 == 0.0
        assert cfg.tau1 is None

    def test_alpha_outside_open_interval(self):
        """Test that alpha must lie strictly between 1 and 2."""
        for alpha in (1.0, 2.0, 0.5, 2.5):
            with pytest.raises(DomainError, match="alpha must lie in"):
                RootConfig(epsilon=1e-2, alpha=alpha)

    def test_non_positive_epsilon(self):
        """Test that epsilon must be positive."""
        with pytest.raises(DomainError, match="epsilon must be positive"):
            RootConfig(epsilon=0.0, alpha=1.5)

    def test_secant_starts_must_increase(self):
        """Test that tau1 must exceed tau0."""
        with pytest.raises(DomainError, match="tau0 must be smaller than tau1"):
            RootConfig(epsilon=1e-2, alpha=1.5, tau0=-1.0, tau1=-2.0)

    def test_max_outer_positive(self):
        """Test that the outer budget must be positive."""
        with pytest.raises(DomainError, match="max_outer"):
            RootConfig(epsilon=1e-2, alpha=1.5, max_outer=0)


class TestMinorantEvaluation:
    """Test cases for MinorantEvaluation and AffineMinorant."""

    def test_ratio(self):
        """Test the relative accuracy of a bound pair."""
        assert MinorantEvaluation(tau=0.0, lower=2.0, upper=3.0).ratio == 1.5
        assert MinorantEvaluation(tau=0.0, lower=0.0, upper=3.0).ratio == math.inf

    def test_minorant(self):
        """Test the affine function carried by an evaluation."""
        evaluation = MinorantEvaluation(tau=1.0, lower=4.0, upper=5.0, slope=-2.0)
        minorant = evaluation.minorant()

        assert minorant == AffineMinorant(anchor=1.0, lower=4.0, slope=-2.0)
        assert minorant(3.0) == 0.0
        assert minorant(0.0) == 6.0

    def test_minorant_without_slope(self):
        """Test that value-only evaluations carry no minorant."""
        with pytest.raises(DomainError, match="no slope"):
            MinorantEvaluation(tau=0.0, lower=1.0, upper=1.0).minorant()


class TestInnerModels:
    """Test cases for InnerResult and InnerConfig."""

    def test_gap(self):
        """Test the duality gap of an inner result."""
        result = InnerResult(
            x=np.zeros(2),
            y=np.zeros(1),
            lower=1.0,
            upper=1.25,
            slope=-1.0,
            iterations=3,
        )
        assert result.gap == 0.25
        assert not result.converged

    def test_inner_budget_positive(self):
        """Test that the inner budget must be positive."""
        with pytest.raises(DomainError, match="max_iter"):
            InnerConfig(max_iter=0)


class TestSolveTrace:
    """Test cases for trace records."""

    def test_record_schema(self):
        """Test the emitted keys and the nulling of non-finite values."""
        record = TraceRecord(
            k=2, tau=0.5, lower=-math.inf, upper=1.0, slope=None, inner_iterations=7
        )
        data = record.to_dict()

        assert tuple(data) == TRACE_KEYS
        assert data["lower"] is None
        assert data["slope"] is None
        assert data["elapsed_ms"] is None
        assert data["inner_iters"] == 7

    def test_accumulators(self):
        """Test the derived views of a trace."""
        trace = SolveTrace()
        for k in range(3):
            trace.append(
                TraceRecord(
                    k=k,
                    tau=float(k),
                    lower=1.0,
                    upper=2.0 - k,
                    slope=-1.0,
                    inner_iterations=10 * k,
                )
            )

        assert len(trace) == 3
        assert trace.taus == [0.0, 1.0, 2.0]
        assert trace.uppers == [2.0, 1.0, 0.0]
        assert trace.total_inner_iterations == 30
        assert [row["k"] for row in trace.to_dicts()] == [0, 1, 2]


class TestResults:
    """Test cases for RootResult and Solution."""

    def test_root_result_converged(self):
        """Test the converged flag."""
        result = RootResult(
            tau=1.0, iterations=2, status=RootStatus.CONVERGED, trace=SolveTrace()
        )
        assert result.converged
        result.status = RootStatus.STALLED
        assert not result.converged

    def test_solution_to_dict(self):
        """Test the JSON representation of a solution."""
        trace = SolveTrace(
            [
                TraceRecord(k=k, tau=k, lower=1, upper=1, slope=-1, inner_iterations=5)
                for k in range(4)
            ]
        )
        solution = Solution(
            x=np.array([1.0, -2.0]),
            tau_star_estimate=3.0,
            misfit_at_x=0.5,
            objective=3.0,
            sigma=0.5,
            epsilon=1e-3,
            status=SolveStatus.CONVERGED,
            trace=trace,
            extras={"lp_objective": 4.0, "missing": math.nan},
        )
        data = solution.to_dict()

        assert data["x"] == [1.0, -2.0]
        metadata = data["metadata"]
        assert metadata["status"] == "converged"
        assert metadata["outer_iterations"] == 3
        assert metadata["inner_iterations"] == 20
        assert metadata["lp_objective"] == 4.0
        assert metadata["missing"] is None


class TestRunConfig:
    """Test cases for the RunConfig model."""

    def test_format_from_string(self):
        """Test that string formats are normalized."""
        config = RunConfig(subcommand="bpdn", trace_format="csv")
        assert config.trace_format is TraceFormat.CSV

    def test_unknown_format(self):
        """Test that unknown formats are rejected."""
        with pytest.raises(DomainError, match="Unknown trace format"):
            RunConfig(subcommand="bpdn", trace_format="xml")

    def test_negative_seed(self):
        """Test that seeds must be non-negative."""
        with pytest.raises(DomainError, match="seed"):
            RunConfig(subcommand="bpdn", seed=-1)
