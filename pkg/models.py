#!/usr/bin/env python3
"""Level-Set Solver Data Models.

Data classes and enums describing root-finding configurations, oracle
evaluations, per-iteration traces and assembled solutions.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from errors import DomainError


class RootMethod(Enum):
    """Outer root-finding schemes."""

    NEWTON = "newton"
    SECANT = "secant"


class RootStatus(Enum):
    """Termination status of an outer root-finding run."""

    CONVERGED = "converged"
    STALLED = "stalled"
    MAX_ITERATIONS = "max_iterations"
    ORACLE_ERROR = "oracle_error"


class SolveStatus(Enum):
    """Termination status reported for an assembled problem."""

    CONVERGED = "converged"
    INFEASIBLE = "infeasible"
    STALLED = "stalled"
    MAX_ITERATIONS = "max_iterations"
    ORACLE_ERROR = "oracle_error"


class AccuracyOutcome(Enum):
    """Verdict of a bound pair against the epsilon/alpha stopping policy."""

    EPSILON_ROOT = "epsilon_root"
    RELATIVE_OK = "relative_ok"
    NEED_MORE_ACCURACY = "need_more_accuracy"


class OracleMode(Enum):
    """Constructions available for synthetic oracles."""

    SYMMETRIC = "symmetric"
    SUBGRADIENT = "subgradient"
    STEEPEST = "steepest"


class InnerMethod(Enum):
    """Inner solvers for the level-set subproblem."""

    APG = "apg"
    FW = "fw"


class FWStepRule(Enum):
    """Step-size rules for Frank-Wolfe."""

    CANONICAL = "canonical"
    EXACT_LINE_SEARCH = "exact_line_search"
    SHORT_STEP = "short_step"


class TraceFormat(Enum):
    """On-disk formats for solve traces."""

    JSONL = "jsonl"
    CSV = "csv"


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class RootConfig:
    """Accuracy targets and safeguards for an outer root-finding run."""

    epsilon: float
    alpha: float
    max_outer: int = 200
    tau0: float = 0.0
    tau1: Optional[float] = None

    def __post_init__(self):
        """Validate the configuration."""
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not 1.0 < self.alpha < 2.0:
            raise DomainError(f"alpha must lie in (1, 2), got {self.alpha}")
        if self.max_outer < 1:
            raise DomainError(f"max_outer must be positive, got {self.max_outer}")
        if self.tau1 is not None and not self.tau0 < self.tau1:
            raise DomainError(
                f"tau0 must be smaller than tau1, got {self.tau0} and {self.tau1}"
            )


@dataclass
class MinorantEvaluation:
    """Bounds on f(tau) returned by an oracle.

    ``slope`` follows the minorant convention
    f(tau') >= lower + slope * (tau' - tau); it is None for oracles that
    only certify values.
    """

    tau: float
    lower: float
    upper: float
    slope: Optional[float] = None
    primal: Optional[np.ndarray] = None
    dual: Optional[np.ndarray] = None
    inner_iterations: int = 0

    @property
    def ratio(self) -> float:
        """Get the relative accuracy upper/lower (inf when lower <= 0)."""
        if self.lower <= 0:
            return math.inf
        return self.upper / self.lower

    def minorant(self) -> "AffineMinorant":
        """Return the affine minorant carried by this evaluation."""
        if self.slope is None:
            raise DomainError("evaluation carries no slope")
        return AffineMinorant(anchor=self.tau, lower=self.lower, slope=self.slope)


@dataclass(frozen=True)
class AffineMinorant:
    """Affine function tau' -> lower + slope * (tau' - anchor)."""

    anchor: float
    lower: float
    slope: float

    def __call__(self, tau: float) -> float:
        return self.lower + self.slope * (tau - self.anchor)


@dataclass
class DualCertificate:
    """Dual point with its dual value and a tau-subgradient of that value."""

    y: np.ndarray
    phi_value: float
    tau_slope: float


@dataclass
class InnerResult:
    """Best primal/dual pair produced by an inner solver."""

    x: np.ndarray
    y: np.ndarray
    lower: float
    upper: float
    slope: float
    iterations: int
    converged: bool = False

    @property
    def gap(self) -> float:
        """Get the duality gap upper - lower."""
        return self.upper - self.lower


@dataclass
class InnerConfig:
    """Inner-solver selection and budget."""

    method: InnerMethod = InnerMethod.APG
    max_iter: int = 20000
    step: FWStepRule = FWStepRule.CANONICAL
    check_identity: bool = False

    def __post_init__(self):
        """Validate the budget."""
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be positive, got {self.max_iter}")


@dataclass
class TraceRecord:
    """One outer iteration of a root-finding run."""

    k: int
    tau: float
    lower: float
    upper: float
    slope: Optional[float]
    inner_iterations: int = 0
    elapsed_ms: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert the record to the emitted trace schema."""
        return {
            "k": self.k,
            "tau": float(self.tau),
            "lower": _finite_or_none(self.lower),
            "upper": _finite_or_none(self.upper),
            "slope": _finite_or_none(self.slope),
            "inner_iters": int(self.inner_iterations),
            "elapsed_ms": _finite_or_none(self.elapsed_ms),
        }


TRACE_KEYS = ("k", "tau", "lower", "upper", "slope", "inner_iters", "elapsed_ms")


@dataclass
class SolveTrace:
    """Per-outer-iteration records of a run."""

    records: List[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        """Append a record."""
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    @property
    def taus(self) -> List[float]:
        """Get the queried tau values in order."""
        return [record.tau for record in self.records]

    @property
    def uppers(self) -> List[float]:
        """Get the recorded upper bounds in order."""
        return [record.upper for record in self.records]

    @property
    def total_inner_iterations(self) -> int:
        """Get the inner iterations summed over all outer steps."""
        return sum(record.inner_iterations for record in self.records)

    def to_dicts(self) -> List[Dict[str, Any]]:
        """Convert every record to a dictionary."""
        return [record.to_dict() for record in self.records]


@dataclass
class RootResult:
    """Outcome of an outer root-finding run."""

    tau: float
    iterations: int
    status: RootStatus
    trace: SolveTrace
    evaluation: Optional[MinorantEvaluation] = None
    error: Optional[Exception] = None
    message: str = ""

    @property
    def converged(self) -> bool:
        """Check whether the run certified an epsilon-root."""
        return self.status is RootStatus.CONVERGED


@dataclass
class Solution:
    """Assembled solution of a level-set problem."""

    x: np.ndarray
    tau_star_estimate: float
    misfit_at_x: float
    objective: float
    sigma: float
    epsilon: float
    status: SolveStatus
    trace: SolveTrace
    certificates: Optional[MinorantEvaluation] = None
    extras: Dict[str, float] = field(default_factory=dict)
    message: str = ""

    @property
    def outer_iterations(self) -> int:
        """Get the number of outer updates taken."""
        return max(len(self.trace) - 1, 0)

    def to_dict(self) -> Dict[str, Any]:
        """Convert the solution to a dictionary for JSON serialization."""
        return {
            "x": [float(value) for value in self.x],
            "metadata": {
                "status": self.status.value,
                "tau_star_estimate": float(self.tau_star_estimate),
                "misfit_at_x": _finite_or_none(self.misfit_at_x),
                "objective": _finite_or_none(self.objective),
                "sigma": float(self.sigma),
                "epsilon": float(self.epsilon),
                "outer_iterations": self.outer_iterations,
                "inner_iterations": self.trace.total_inner_iterations,
                "message": self.message,
                **{key: _finite_or_none(value) for key, value in self.extras.items()},
            },
        }


@dataclass
class RunConfig:
    """Options shared by every CLI subcommand."""

    subcommand: str
    seed: int = 0
    output_path: str = "output"
    trace_format: TraceFormat = TraceFormat.JSONL
    record_timing: bool = False
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Normalize the trace format."""
        if isinstance(self.trace_format, str):
            try:
                self.trace_format = TraceFormat(self.trace_format)
            except ValueError:
                raise DomainError(f"Unknown trace format: {self.trace_format}")
        if self.seed < 0:
            raise DomainError(f"seed must be non-negative, got {self.seed}")
