#!/usr/bin/env python3
"""Level-Set Solver Oracles.

Oracles report certified bounds on f(tau) = v(tau) - sigma. The
level-set oracle drives an inner solver until its bounds are accurate
enough for the outer root finder and turns the inner dual certificate
into an affine minorant; the synthetic oracle wraps an exact function
for experiments on the outer methods alone.
"""

import logging
import math
from typing import TYPE_CHECKING, Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from errors import (
    DomainError,
    InfeasibleError,
    InnerBudgetExceeded,
    MinorantViolation,
    ZeroDualError,
)
from inner import accelerated_projected_gradient, estimate_lipschitz, frank_wolfe
from models import (
    AccuracyOutcome,
    AffineMinorant,
    DualCertificate,
    InnerConfig,
    InnerMethod,
    InnerResult,
    MinorantEvaluation,
    OracleMode,
)

if TYPE_CHECKING:
    from problems import LevelSetProblem

logger = logging.getLogger(__name__)

ValueOracle = Callable[[float, float], MinorantEvaluation]
ExactFunction = Callable[[float], Tuple[float, float]]

ZERO_DUAL_NORM = 1e-12
MINORANT_SLACK = 1e-8
INFEASIBLE_TAU_FACTOR = 1e6
INFEASIBLE_WINDOW = 5
INFEASIBLE_DECREASE = 1e-12


def gap_to_relative(
    lower: float, upper: float, epsilon: float, alpha: float
) -> AccuracyOutcome:
    """Classify a bound pair against the epsilon-root / relative-accuracy policy.

    Args:
        lower: Lower bound on f(tau)
        upper: Upper bound on f(tau)
        epsilon: Target accuracy on f-values
        alpha: Required relative accuracy

    Returns:
        The accuracy outcome

    Raises:
        DomainError: If lower > upper
    """
    if lower > upper:
        raise DomainError(f"lower bound {lower} exceeds upper bound {upper}")
    if upper <= epsilon:
        return AccuracyOutcome.EPSILON_ROOT
    if upper - lower <= (1.0 - 1.0 / alpha) * epsilon:
        return AccuracyOutcome.RELATIVE_OK
    if lower > 0 and upper / lower <= alpha:
        return AccuracyOutcome.RELATIVE_OK
    return AccuracyOutcome.NEED_MORE_ACCURACY


def minorant_from_dual(
    cert: DualCertificate, tau_bar: float, sigma: float
) -> AffineMinorant:
    """Turn a dual certificate into an affine minorant of f = v - sigma."""
    return AffineMinorant(
        anchor=tau_bar, lower=cert.phi_value - sigma, slope=cert.tau_slope
    )


def squared_secant_bounds(l2: float, u2: float, sigma: float) -> Tuple[float, float]:
    """Convert bounds on f2 = (v^2 - sigma^2)/2 into bounds on f1 = v - sigma.

    The f1 ratio never exceeds the f2 ratio:
    (u - sigma)/(l - sigma) <= (u^2 - sigma^2)/(l^2 - sigma^2).

    Raises:
        DomainError: If the recovered lower value falls below sigma
    """
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma}")
    if l2 < 0:
        raise DomainError(f"recovered lower value is below sigma (l2={l2})")
    if u2 < l2:
        raise DomainError(f"lower bound {l2} exceeds upper bound {u2}")
    lower = math.sqrt(2.0 * l2 + sigma**2)
    upper = math.sqrt(2.0 * u2 + sigma**2)
    return lower - sigma, upper - sigma


def squared_newton_minorant(
    y: np.ndarray, s2: float, l2: float, upper_u: float, sigma: float, tau: float
) -> MinorantEvaluation:
    """Build an f1 minorant from a certificate of the squared problem.

    Args:
        y: Dual certificate of the squared problem
        s2: tau-subgradient of the squared dual value at y (non-positive)
        l2: Squared dual value Phi2(y, tau)
        upper_u: Upper bound on v(tau) (unsquared)
        sigma: Target level
        tau: Anchor

    Returns:
        Evaluation with lower = (Phi2 + ||y||^2/2)/||y|| - sigma,
        upper = upper_u - sigma and slope s2/||y||

    Raises:
        ZeroDualError: If ||y|| < 1e-12
        MinorantViolation: If s2 is positive
    """
    y = np.asarray(y, dtype=float)
    norm = float(np.linalg.norm(y))
    if norm < ZERO_DUAL_NORM:
        raise ZeroDualError(f"dual certificate vanished at tau={tau}")
    if s2 > 0:
        raise MinorantViolation(f"squared dual slope {s2} is positive at tau={tau}")
    refined = (l2 + 0.5 * norm**2) / norm
    return MinorantEvaluation(
        tau=tau,
        lower=refined - sigma,
        upper=upper_u - sigma,
        slope=s2 / norm,
        dual=y,
    )


def inner_tolerance_for(epsilon: float, alpha: float) -> float:
    """Return the additive f2 tolerance (1 - 1/alpha)^2 epsilon^2 / 2."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (1, 2), got {alpha}")
    return 0.5 * (1.0 - 1.0 / alpha) ** 2 * epsilon**2


class SyntheticOracle:
    """Alpha-accurate oracle wrapped around an exact convex decreasing function."""

    def __init__(
        self,
        f: ExactFunction,
        alpha: float,
        mode: OracleMode = OracleMode.SYMMETRIC,
        search_width: Optional[float] = None,
    ):
        """Initialize the oracle.

        Args:
            f: Callable returning (f(tau), subgradient at tau)
            alpha: Relative accuracy of the reported bounds (>= 1)
            mode: How slopes are produced
            search_width: Width of the window left of tau scanned by the
                steepest-slope search (default 10 max(1, |tau|))
        """
        if alpha < 1:
            raise DomainError(f"alpha must be at least 1, got {alpha}")
        self.f = f
        self.alpha = alpha
        self.mode = mode
        self.search_width = search_width

    def __call__(self, tau: float, alpha: Optional[float] = None) -> MinorantEvaluation:
        value, grad = self.f(tau)
        slope: Optional[float] = None
        if value <= 0:
            if self.mode is not OracleMode.SYMMETRIC:
                slope = grad
            return MinorantEvaluation(tau=tau, lower=value, upper=value, slope=slope)
        root = math.sqrt(self.alpha)
        lower, upper = value / root, value * root
        if self.mode is OracleMode.SUBGRADIENT:
            slope = grad
        elif self.mode is OracleMode.STEEPEST:
            slope = self._steepest_slope(tau, lower, grad)
        return MinorantEvaluation(tau=tau, lower=lower, upper=upper, slope=slope)

    def _steepest_slope(self, tau: float, lower: float, grad: float) -> float:
        width = self.search_width or 10.0 * max(1.0, abs(tau))

        def negative_quotient(point: float) -> float:
            return -(lower - self.f(point)[0]) / (tau - point)

        found = minimize_scalar(
            negative_quotient,
            bounds=(tau - width, tau - 1e-9 * width),
            method="bounded",
            options={"xatol": 1e-12 * width},
        )
        best = -float(found.fun)
        return min(best + 1e-9 * (1.0 + abs(best)), grad)


def synthetic_oracle(
    f: ExactFunction, alpha: float, mode: OracleMode = OracleMode.SYMMETRIC
) -> SyntheticOracle:
    """Create a synthetic oracle for an exact function."""
    return SyntheticOracle(f, alpha, mode)


class LevelSetOracle:
    """Oracle for f(tau) = v(tau) - sigma backed by an inner first-order solver.

    Holds the warm-start primal point and the minorants emitted so far, so
    an instance must not be queried concurrently.
    """

    def __init__(
        self, problem: "LevelSetProblem", inner: InnerConfig, epsilon: float
    ):
        """Initialize the oracle.

        Args:
            problem: Problem whose value function is queried
            inner: Inner-solver configuration
            epsilon: Target accuracy of the outer root finder
        """
        if not epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        if inner.method is InnerMethod.APG and problem.fit.lipschitz is None:
            raise DomainError("APG needs a loss with a Lipschitz gradient")
        if inner.method is InnerMethod.FW and not problem.constraint.has_lmo:
            raise DomainError(
                f"{problem.constraint.kind.value} has no LMO for Frank-Wolfe"
            )
        self.problem = problem
        self.inner = inner
        self.epsilon = epsilon
        self.lipschitz: Optional[float] = None
        self.warm = np.zeros(problem.A.shape[1])
        self.minorants: List[AffineMinorant] = []
        self.history: List[Tuple[float, float]] = []
        self.total_inner_iterations = 0

    def _evaluate(self, result: InnerResult, tau: float) -> MinorantEvaluation:
        problem = self.problem
        sigma = problem.sigma
        if problem.squared:
            upper_u = math.sqrt(max(2.0 * result.upper, 0.0))
            norm = float(np.linalg.norm(result.y))
            if norm < ZERO_DUAL_NORM:
                if upper_u - sigma > self.epsilon:
                    raise ZeroDualError(f"dual certificate vanished at tau={tau}")
                evaluation = MinorantEvaluation(
                    tau=tau, lower=-sigma, upper=upper_u - sigma, slope=0.0
                )
            else:
                evaluation = squared_newton_minorant(
                    result.y, result.slope, result.lower, upper_u, sigma, tau
                )
        else:
            minorant = minorant_from_dual(
                DualCertificate(result.y, result.lower, result.slope), tau, sigma
            )
            evaluation = MinorantEvaluation(
                tau=tau,
                lower=minorant.lower,
                upper=result.upper - sigma,
                slope=minorant.slope,
                dual=result.y,
            )
        evaluation.lower = min(evaluation.lower, evaluation.upper)
        evaluation.primal = result.x
        evaluation.inner_iterations = result.iterations
        return evaluation

    def _outcome(self, evaluation: MinorantEvaluation, alpha: float) -> AccuracyOutcome:
        lower = max(evaluation.lower, 0.0)
        upper = max(evaluation.upper, lower)
        return gap_to_relative(lower, upper, self.epsilon, alpha)

    def _run_inner(self, tau: float, alpha: float) -> InnerResult:
        problem = self.problem

        def stop(result: InnerResult) -> bool:
            try:
                evaluation = self._evaluate(result, tau)
            except ZeroDualError:
                return False
            return self._outcome(evaluation, alpha) is not (
                AccuracyOutcome.NEED_MORE_ACCURACY
            )

        if problem.squared:
            tolerance = inner_tolerance_for(self.epsilon, alpha)
        else:
            tolerance = (1.0 - 1.0 / alpha) * self.epsilon

        if self.inner.method is InnerMethod.APG:
            if self.lipschitz is None:
                self.lipschitz = problem.fit.lipschitz * estimate_lipschitz(problem.A)
            return accelerated_projected_gradient(
                problem.A,
                problem.fit,
                problem.constraint,
                tau,
                self.warm,
                tol_additive=tolerance,
                max_iter=self.inner.max_iter,
                lipschitz=self.lipschitz,
                stop=stop,
            )
        return frank_wolfe(
            problem.A,
            problem.fit,
            problem.constraint,
            tau,
            self.warm,
            step=self.inner.step,
            tol_additive=tolerance,
            max_iter=self.inner.max_iter,
            stop=stop,
            check_identity=self.inner.check_identity,
        )

    def _validate_minorants(self, evaluation: MinorantEvaluation) -> None:
        upper = evaluation.upper
        for minorant in self.minorants:
            if minorant(evaluation.tau) > upper + MINORANT_SLACK * (1.0 + abs(upper)):
                raise MinorantViolation(
                    f"minorant anchored at tau={minorant.anchor} exceeds the "
                    f"certified upper bound {upper} at tau={evaluation.tau}"
                )
        if evaluation.slope is not None:
            self.minorants.append(evaluation.minorant())

    def _check_progress(self, evaluation: MinorantEvaluation) -> None:
        self.history.append((evaluation.tau, evaluation.upper))
        tau0 = self.history[0][0]
        if evaluation.tau <= INFEASIBLE_TAU_FACTOR * max(1.0, tau0 + 1.0):
            return
        if len(self.history) < INFEASIBLE_WINDOW:
            return
        earlier = self.history[-INFEASIBLE_WINDOW][1]
        if earlier - evaluation.upper < INFEASIBLE_DECREASE:
            raise InfeasibleError(
                f"misfit stalls at {evaluation.upper + self.problem.sigma} "
                f"above sigma={self.problem.sigma} while tau={evaluation.tau}"
            )

    def __call__(self, tau: float, alpha: float) -> MinorantEvaluation:
        """Evaluate bounds on f(tau) to relative accuracy alpha.

        Raises:
            DomainError: If tau < 0
            InnerBudgetExceeded: If the inner budget runs out first
            MinorantViolation: If an earlier minorant exceeds the new upper bound
            InfeasibleError: If the misfit stalls above sigma at huge tau
        """
        if tau < 0:
            raise DomainError(f"tau must be non-negative, got {tau}")
        result = self._run_inner(tau, alpha)
        self.total_inner_iterations += result.iterations
        evaluation = self._evaluate(result, tau)
        if self._outcome(evaluation, alpha) is AccuracyOutcome.NEED_MORE_ACCURACY:
            raise InnerBudgetExceeded(
                f"inner budget of {self.inner.max_iter} exhausted at tau={tau} "
                f"with bounds [{evaluation.lower}, {evaluation.upper}]",
                best=evaluation,
            )
        self.warm = result.x
        self._validate_minorants(evaluation)
        self._check_progress(evaluation)
        logger.debug(
            "oracle tau=%.6g lower=%.6g upper=%.6g inner=%d",
            tau,
            evaluation.lower,
            evaluation.upper,
            result.iterations,
        )
        return evaluation


def make_value_oracle(
    problem: "LevelSetProblem", inner: InnerConfig, epsilon: float
) -> LevelSetOracle:
    """Create the inner-solver-backed oracle for a level-set problem."""
    return LevelSetOracle(problem, inner, epsilon)
